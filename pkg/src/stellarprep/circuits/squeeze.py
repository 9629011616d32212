"""Truncated and product-formula squeezing on one-hot registers.

With ``T_n = (i l_n / 2)(|n+2><n| - |n><n+2|)`` and ``l_n = sqrt((n+1)(n+2))``
the truncated squeezer is ``S^lam(r) = exp(-i r sum_{n <= lam-2} T_n)``.  The
terms are grouped as ``s_m = sum_k T_{4k+m}``; terms inside one group act on
disjoint level pairs and commute.  The product formula is

    S^{lam,K}(r) = (e^{-i r s_0/K} e^{-i r s_2/K})^K (e^{-i r s_1/K} e^{-i r s_3/K})^K.

On one-hot qubits ``-i (r/K) T_n = (r l_n / 4K) i (X_{n+2} Y_n - Y_{n+2} X_n)``,
whose exponential is the commuting pair
``exp(+i a X_{n+2} Y_n) exp(-i a Y_{n+2} X_n)`` with ``a = r l_n / 4K``.
"""

from __future__ import annotations

import math
from typing import List

import numpy as np
import scipy.linalg as sla

from .encoding import QubitEncoding
from .gates import Gate, GateCircuit


def ell(n: int) -> float:
    return math.sqrt((n + 1) * (n + 2)) if n >= 0 else 0.0


def t_matrix(n: int, lam: int) -> np.ndarray:
    m = np.zeros((lam + 1, lam + 1), dtype=complex)
    if 0 <= n <= lam - 2:
        m[n + 2, n] = 0.5j * ell(n)
        m[n, n + 2] = -0.5j * ell(n)
    return m


def group_terms(m: int, lam: int) -> List[int]:
    """Levels ``n = 4k + m`` with ``n <= lam - 2``."""
    return list(range(m, lam - 1, 4))


def s_matrix(m: int, lam: int) -> np.ndarray:
    out = np.zeros((lam + 1, lam + 1), dtype=complex)
    for n in group_terms(m, lam):
        out += t_matrix(n, lam)
    return out


def truncated_squeeze(r: float, lam: int) -> np.ndarray:
    """``S^lam(r)`` on ``lam + 1`` levels."""
    gen = sum((s_matrix(m, lam) for m in range(4)), np.zeros((lam + 1, lam + 1), dtype=complex))
    return sla.expm(-1j * r * gen)


def trotter_squeeze_matrix(r: float, lam: int, K: int) -> np.ndarray:
    """``S^{lam,K}(r)`` built from exact exponentials of the four groups."""
    if K < 1:
        raise ValueError("K must be positive")
    e = [sla.expm(-1j * r / K * s_matrix(m, lam)) for m in range(4)]
    even = np.linalg.matrix_power(e[0] @ e[2], K)
    odd = np.linalg.matrix_power(e[1] @ e[3], K)
    return even @ odd


def _term_gates(n: int, angle: float, offset: int, group: int) -> List[Gate]:
    hi, lo = offset + n + 2, offset + n
    return [
        Gate("pauli2", (hi, lo), -angle, paulis="XY", group=group),
        Gate("pauli2", (hi, lo), angle, paulis="YX", group=group),
    ]


def trotter_squeeze(r: float, encoding: QubitEncoding, K: int, n_modes: int = 1) -> GateCircuit:
    """Gate sequence for ``prod_j S_j^{lam,K}(r)`` on one-hot registers.

    The odd-level product acts first, then the even-level one; each factor
    ``exp(-i r s_m / K)`` is one two-qubit rotation pair per term.  Every pair
    carries its own ``group`` tag.
    """
    if encoding.scheme != "unary":
        raise ValueError("product-formula squeezing is implemented for the unary encoding only")
    if K < 1:
        raise ValueError("K must be positive")
    lam = encoding.lam
    w = encoding.n_q
    circ = GateCircuit(w * n_modes, [], encoding, {"r": r, "lam": lam, "K": K, "N": n_modes})
    tag = 0
    # time order: (s3, s1) K times, then (s2, s0) K times
    for pair in ((3, 1), (2, 0)):
        for _ in range(K):
            for m in pair:
                for n in group_terms(m, lam):
                    a = r * ell(n) / (4 * K)
                    for j in range(n_modes):
                        circ.extend(_term_gates(n, a, j * w, tag))
                        tag += 1
    return circ


def unary_parity_qubits(encoding: QubitEncoding, n_modes: int = 1) -> List[int]:
    """Qubits whose ``Z`` product is the boson-number parity on one-hot words."""
    w = encoding.n_q
    return [j * w + n for j in range(n_modes) for n in range(1, encoding.lam + 1, 2)]
