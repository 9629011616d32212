"""Gate records, circuits and gate counting.

Qubit ``0`` is the leftmost character of a bit string and the most
significant bit of a statevector index.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

GATE_KINDS = ("x", "cx", "rot", "mcrot", "pauli2")
PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def rotation_matrix(axis: str, angle: float) -> np.ndarray:
    """``exp(-i angle P / 2)`` for ``P`` in ``{X, Y, Z}``."""
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return c * PAULI["I"] - 1j * s * PAULI[axis]


def pauli2_matrix(paulis: str, angle: float) -> np.ndarray:
    """``exp(-i angle P0 (x) P1)``; note the absence of a factor 1/2."""
    p = np.kron(PAULI[paulis[0]], PAULI[paulis[1]])
    return math.cos(angle) * np.eye(4) - 1j * math.sin(angle) * p


@dataclass(frozen=True)
class Gate:
    """One gate.

    ``kind`` is one of

    * ``"x"``: NOT on ``qubits[0]``
    * ``"cx"``: CNOT, control ``qubits[0]``, target ``qubits[1]``
    * ``"rot"``: ``exp(-i angle P/2)`` about ``axis`` on ``qubits[0]``
    * ``"mcrot"``: the same rotation on ``qubits[0]`` applied only when each
      qubit in ``controls`` holds the matching entry of ``control_values``
    * ``"pauli2"``: ``exp(-i angle P (x) P')`` with ``paulis = "PP'"`` on
      ``qubits = (a, b)``

    ``group`` tags gates that together realise one logical step; it is used by
    the legality checks of the squeezing circuits.
    """

    kind: str
    qubits: Tuple[int, ...]
    angle: float = 0.0
    axis: str = ""
    controls: Tuple[int, ...] = ()
    control_values: Tuple[int, ...] = ()
    paulis: str = ""
    group: int = -1

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        n_targets = {"x": 1, "cx": 2, "rot": 1, "mcrot": 1, "pauli2": 2}[self.kind]
        if len(self.qubits) != n_targets:
            raise ValueError(f"{self.kind} acts on {n_targets} qubit(s)")
        ops = self.qubits + self.controls
        if len(set(ops)) != len(ops) or min(ops) < 0:
            raise ValueError("gate operands must be distinct non-negative indices")
        if not math.isfinite(self.angle):
            raise ValueError("gate angle must be finite")
        if self.kind in ("rot", "mcrot") and self.axis not in ("X", "Y", "Z"):
            raise ValueError("rotation axis must be X, Y or Z")
        if self.kind == "mcrot" and len(self.controls) != len(self.control_values):
            raise ValueError("one control value per control qubit")
        if self.kind == "pauli2" and (len(self.paulis) != 2 or any(p not in "XYZ" for p in self.paulis)):
            raise ValueError("pauli2 needs two Pauli letters")

    @property
    def operands(self) -> Tuple[int, ...]:
        return self.qubits + self.controls

    def local_action(self):
        """``(targets, unitary, controls, control_values)`` for the simulators."""
        if self.kind == "x":
            return self.qubits, PAULI["X"], (), ()
        if self.kind == "cx":
            return self.qubits[1:], PAULI["X"], self.qubits[:1], (1,)
        if self.kind == "rot":
            return self.qubits, rotation_matrix(self.axis, self.angle), (), ()
        if self.kind == "mcrot":
            return self.qubits, rotation_matrix(self.axis, self.angle), self.controls, self.control_values
        return self.qubits, pauli2_matrix(self.paulis, self.angle), (), ()

    def inverse(self) -> "Gate":
        if self.kind in ("x", "cx"):
            return self
        return Gate(self.kind, self.qubits, -self.angle, self.axis, self.controls, self.control_values,
                    self.paulis, self.group)


@dataclass
class GateCircuit:
    """Ordered gate list (first gate acts first) on ``n_qubits`` qubits."""

    n_qubits: int
    gates: List[Gate] = field(default_factory=list)
    encoding: Optional[object] = None
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("a circuit needs at least one qubit")
        for g in self.gates:
            self._check(g)

    def _check(self, g: Gate):
        if max(g.operands) >= self.n_qubits:
            raise ValueError(f"gate {g} addresses a qubit outside the register")

    def append(self, gate: Gate):
        self._check(gate)
        self.gates.append(gate)

    def extend(self, gates: Iterable[Gate]):
        for g in gates:
            self.append(g)

    def __len__(self):
        return len(self.gates)

    def inverse(self) -> "GateCircuit":
        return GateCircuit(self.n_qubits, [g.inverse() for g in reversed(self.gates)], self.encoding,
                           dict(self.metadata))

    def compose(self, other: "GateCircuit") -> "GateCircuit":
        """``self`` followed by ``other``."""
        if other.n_qubits != self.n_qubits:
            raise ValueError("register sizes differ")
        meta = dict(self.metadata)
        meta.update(other.metadata)
        return GateCircuit(self.n_qubits, list(self.gates) + list(other.gates),
                           self.encoding or other.encoding, meta)

    def counts(self) -> Dict[str, int]:
        return gate_counts(self)

    def metadata_text(self) -> str:
        """Sidecar record: one ``key value`` line per metadata entry."""
        lines = [f"n_qubits {self.n_qubits}", f"n_gates {len(self.gates)}"]
        if self.encoding is not None:
            lines.append(f"encoding {self.encoding.scheme} {self.encoding.lam}")
        for k in sorted(self.metadata):
            lines.append(f"{k} {self.metadata[k]}")
        return "\n".join(lines) + "\n"


def mcrot_cnot_cost(k: int) -> int:
    """CNOT-equivalent cost of a rotation with ``k`` controls and no ancillas.

    ===========  ===========================================================
    controls k   CNOTs
    ===========  ===========================================================
    0            0
    1            2  (two CNOTs around half-angle rotations)
    2            4  (Gray-code multiplexor, all rotations about one axis)
    k >= 3       20k - 38  (linear-depth decomposition of a multi-controlled
                 special-unitary gate, Vale et al. 2023)
    ===========  ===========================================================
    """
    if k < 0:
        raise ValueError("negative control count")
    if k <= 2:
        return (0, 2, 4)[k]
    return 20 * k - 38


def gate_counts(circuit: GateCircuit) -> Dict[str, int]:
    """Exact counts by kind plus ``cnot_equivalent`` and ``two_qubit`` totals.

    A two-qubit Pauli rotation costs two CNOTs; multi-controlled rotations are
    charged per :func:`mcrot_cnot_cost`.
    """
    c = Counter(g.kind for g in circuit.gates)
    out = {k: int(c.get(k, 0)) for k in GATE_KINDS}
    cnot = out["cx"] + 2 * out["pauli2"]
    for g in circuit.gates:
        if g.kind == "mcrot":
            cnot += mcrot_cnot_cost(len(g.controls))
    out["cnot_equivalent"] = cnot
    out["two_qubit"] = out["cx"] + out["pauli2"]
    out["single_qubit"] = out["x"] + out["rot"]
    out["total"] = len(circuit.gates)
    return out
