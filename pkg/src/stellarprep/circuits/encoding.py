"""Qubit encodings of truncated boson registers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

from ..ansatz import CoreState


@dataclass(frozen=True)
class QubitEncoding:
    """Map of a cutoff-``lam`` mode onto ``n_q`` qubits.

    ``unary``: ``|n>`` sets qubit ``n`` of the register and clears the others,
    so the vacuum is ``10...0``.  ``binary``: ``n`` is written in base two
    with the register's first qubit as the least significant bit.
    """

    scheme: str
    lam: int

    def __post_init__(self):
        if self.scheme not in ("unary", "binary"):
            raise ValueError("scheme must be 'unary' or 'binary'")
        if self.lam < 0:
            raise ValueError("cutoff must be non-negative")

    @property
    def n_q(self) -> int:
        if self.scheme == "unary":
            return self.lam + 1
        return max(1, math.ceil(math.log2(self.lam + 1)))

    def encode(self, n: int) -> str:
        """Bit string of occupation ``n`` for one mode."""
        if not 0 <= n <= self.lam:
            raise ValueError(f"occupation {n} outside cutoff {self.lam}")
        if self.scheme == "unary":
            return "0" * n + "1" + "0" * (self.lam - n)
        return format(n, f"0{self.n_q}b")[::-1]

    def decode(self, bits: str) -> int:
        if len(bits) != self.n_q:
            raise ValueError("wrong register width")
        if self.scheme == "unary":
            if bits.count("1") != 1:
                raise ValueError(f"{bits} is not a one-hot word")
            return bits.index("1")
        n = int(bits[::-1], 2)
        if n > self.lam:
            raise ValueError(f"{bits} encodes {n} above the cutoff")
        return n

    def encode_occupations(self, occ: Sequence[int]) -> str:
        return "".join(self.encode(n) for n in occ)

    def decode_occupations(self, bits: str) -> Tuple[int, ...]:
        w = self.n_q
        if len(bits) % w:
            raise ValueError("bit string is not a whole number of registers")
        return tuple(self.decode(bits[i : i + w]) for i in range(0, len(bits), w))

    def is_legal(self, bits: str) -> bool:
        try:
            self.decode_occupations(bits)
        except ValueError:
            return False
        return True


def encode_core(core: CoreState, encoding: QubitEncoding) -> Dict[str, float]:
    """Normalised core state as ``{bit string: amplitude}``; registers ordered by site."""
    R = core.template.R
    if encoding.lam < R:
        raise ValueError(f"cutoff {encoding.lam} is below the rank {R}")
    amps = core.fock_amplitudes(normalize=True)
    return {encoding.encode_occupations(occ): float(a) for occ, a in sorted(amps.items())}


def encode_amplitudes(amps: Dict[Tuple[int, ...], float], encoding: QubitEncoding) -> Dict[str, float]:
    """Encode an arbitrary ``{occupation vector: amplitude}`` map."""
    return {encoding.encode_occupations(occ): float(a) for occ, a in sorted(amps.items())}


def fock_vector_from_bits(state: Dict[int, complex], encoding: QubitEncoding, n_modes: int):
    """Convert a sparse qubit state into ``{occupations: amplitude}``.

    Entries outside the legal code space are returned separately.
    """
    width = encoding.n_q * n_modes
    legal, illegal = {}, {}
    for k, v in state.items():
        bits = format(k, f"0{width}b")
        try:
            legal[encoding.decode_occupations(bits)] = v
        except ValueError:
            illegal[bits] = v
    return legal, illegal
