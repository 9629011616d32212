"""Sparse state preparation by successive merging of basis strings.

Each merge step picks two strings ``x1`` and ``x2`` that are singled out by
the values on a few "difference" qubits, aligns ``x1`` onto ``x2`` with CNOTs
and folds the pair into one string with a controlled Y rotation.  Repeating
until a single string is left and then clearing it with NOTs gives a circuit
that maps the target to ``|0...0>``; its inverse prepares the target.

Ties follow a fixed rule: qubits are scanned from index 0 and an even split
keeps the strings holding a 1.
"""

from __future__ import annotations

import math
from typing import Dict, List, Sequence, Tuple

from .gates import Gate, GateCircuit

Bits = str


def _flip(s: Bits, b: int) -> Bits:
    return s[:b] + ("1" if s[b] == "0" else "0") + s[b + 1 :]


def _split(T: Sequence[Bits], n: int):
    """First qubit with the most unequal non-trivial split, and the smaller side's value."""
    best = None
    for b in range(n):
        ones = sum(1 for x in T if x[b] == "1")
        zeros = len(T) - ones
        if ones == 0 or zeros == 0:
            continue
        gap = abs(ones - zeros)
        if best is None or gap > best[0]:
            best = (gap, b, 1 if ones <= zeros else 0)
    if best is None:
        raise ValueError("strings are not distinct")
    return best[1], best[2]


def _narrow(T: List[Bits], n: int, dif_qubits: List[int], dif_vals: List[int]):
    while len(T) > 1:
        b, v = _split(T, n)
        dif_qubits.append(b)
        dif_vals.append(v)
        T = [x for x in T if x[b] == str(v)]
    return T


def _apply_classical(g: Gate, s: Bits) -> Bits:
    if g.kind == "x":
        return _flip(s, g.qubits[0])
    if g.kind == "cx":
        return _flip(s, g.qubits[1]) if s[g.qubits[0]] == "1" else s
    return s


def reduction_step(state: Dict[Bits, float]) -> Tuple[List[Gate], Dict[Bits, float]]:
    """One merge: gates (in time order) and the reduced state with one fewer string."""
    S = list(state)
    if len(S) < 2:
        raise ValueError("nothing to merge")
    n = len(S[0])
    dif_qubits: List[int] = []
    dif_vals: List[int] = []
    x1 = _narrow(list(S), n, dif_qubits, dif_vals)[0]
    dif = dif_qubits.pop()
    dif_vals.pop()
    T2 = [x for x in S if all(x[b] == str(v) for b, v in zip(dif_qubits, dif_vals)) and x != x1]
    x2 = _narrow(T2, n, dif_qubits, dif_vals)[0]

    gates: List[Gate] = []
    if x1[dif] != "1":
        gates.append(Gate("x", (dif,)))
    for b in range(n):
        if b != dif and x1[b] != x2[b]:
            gates.append(Gate("cx", (dif, b)))
    for b in dif_qubits:
        if x2[b] != "1":
            gates.append(Gate("x", (b,)))

    new: Dict[Bits, float] = {}
    for s, a in state.items():
        for g in gates:
            s = _apply_classical(g, s)
        new[s] = a
    y1 = x1
    for g in gates:
        y1 = _apply_classical(g, y1)
    y2 = _flip(y1, dif)  # the image of x2
    a1, a2 = new.pop(y1), new[y2]
    theta = -2.0 * math.atan2(a1, a2)
    gates.append(Gate("mcrot", (dif,), theta, "Y", tuple(dif_qubits), (1,) * len(dif_qubits)))
    new[y2] = math.hypot(a1, a2)
    return gates, new


def sparse_prep(target: Dict[Bits, float], n_qubits: int | None = None, tol: float = 1e-12) -> GateCircuit:
    """Circuit taking ``|0...0>`` to ``target`` (real amplitudes, up to a global sign).

    ``target`` maps bit strings (qubit 0 first) to amplitudes; entries below
    ``tol`` in magnitude are dropped and the rest renormalised.
    """
    state = {k: float(v) for k, v in target.items() if abs(v) > tol}
    if not state:
        raise ValueError("target state is empty")
    widths = {len(k) for k in state}
    if len(widths) != 1:
        raise ValueError("bit strings of unequal length")
    n = widths.pop()
    if n_qubits is not None and n_qubits != n:
        raise ValueError("n_qubits does not match the bit strings")
    nrm = math.sqrt(sum(v * v for v in state.values()))
    state = {k: v / nrm for k, v in state.items()}
    forward: List[Gate] = []
    while len(state) > 1:
        gates, state = reduction_step(state)
        forward.extend(gates)
    (last,) = state
    forward.extend(Gate("x", (b,)) for b in range(n) if last[b] == "1")
    circ = GateCircuit(n, forward)
    out = circ.inverse()
    out.metadata["support"] = len(target)
    return out
