"""Statevector simulators.

:func:`simulate` holds the full ``2**n`` vector and is limited to 26 qubits.
:func:`simulate_sparse` keeps a ``{basis index: amplitude}`` map and suits
wide but sparsely populated registers such as one-hot encodings.
"""

from __future__ import annotations

from typing import Callable, Dict, Optional

import numpy as np

from .gates import Gate, GateCircuit

MAX_DENSE_QUBITS = 26


def _apply_dense(psi: np.ndarray, n: int, gate: Gate) -> np.ndarray:
    targets, u, controls, cvals = gate.local_action()
    psi = psi.reshape((2,) * n)
    idx = [slice(None)] * n
    for c, v in zip(controls, cvals):
        idx[c] = int(v)
    idx = tuple(idx)
    sub = psi[idx]
    ax = [t - sum(c < t for c in controls) for t in targets]
    k = len(targets)
    ut = u.reshape((2,) * (2 * k))
    out = np.tensordot(ut, sub, axes=(list(range(k, 2 * k)), ax))
    out = np.moveaxis(out, list(range(k)), ax)
    psi = psi.copy()
    psi[idx] = out
    return psi.reshape(-1)


def basis_state(n_qubits: int, bits: str | None = None) -> np.ndarray:
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[int(bits, 2) if bits else 0] = 1.0
    return psi


def simulate(
    circuit: GateCircuit,
    initial: Optional[np.ndarray] = None,
    observer: Optional[Callable[[int, np.ndarray], None]] = None,
) -> np.ndarray:
    """Exact statevector of ``circuit`` applied to ``|0...0>`` (or ``initial``).

    ``observer(i, psi)`` is called after gate ``i`` when given.
    """
    n = circuit.n_qubits
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"{n} qubits exceeds the dense simulator limit of {MAX_DENSE_QUBITS}")
    psi = basis_state(n) if initial is None else np.asarray(initial, dtype=complex).copy()
    if psi.shape != (2**n,):
        raise ValueError("initial state has the wrong dimension")
    for i, g in enumerate(circuit.gates):
        psi = _apply_dense(psi, n, g)
        if observer is not None:
            observer(i, psi)
    return psi


def unitary(circuit: GateCircuit) -> np.ndarray:
    """Full matrix of a small circuit, column by column."""
    n = circuit.n_qubits
    if n > 12:
        raise ValueError("unitary() is meant for at most 12 qubits")
    cols = [simulate(circuit, basis_state(n, format(j, f"0{n}b"))) for j in range(2**n)]
    return np.stack(cols, axis=1)


def _apply_sparse(state: Dict[int, complex], n: int, gate: Gate, tol: float) -> Dict[int, complex]:
    targets, u, controls, cvals = gate.local_action()
    shifts = [n - 1 - t for t in targets]
    cmask = 0
    cwant = 0
    for c, v in zip(controls, cvals):
        cmask |= 1 << (n - 1 - c)
        cwant |= int(v) << (n - 1 - c)
    k = len(targets)
    tmask = 0
    for s in shifts:
        tmask |= 1 << s
    out: Dict[int, complex] = {}
    for key, amp in state.items():
        if (key & cmask) != cwant:
            out[key] = out.get(key, 0.0) + amp
            continue
        col = 0
        for s in shifts:
            col = (col << 1) | ((key >> s) & 1)
        base = key & ~tmask
        for row in range(2**k):
            m = u[row, col]
            if m == 0:
                continue
            nk = base
            for j, s in enumerate(shifts):
                if (row >> (k - 1 - j)) & 1:
                    nk |= 1 << s
            out[nk] = out.get(nk, 0.0) + m * amp
    return {k_: v for k_, v in out.items() if abs(v) > tol}


def simulate_sparse(
    circuit: GateCircuit,
    initial: Optional[Dict[str, complex]] = None,
    observer: Optional[Callable[[int, Dict[int, complex]], None]] = None,
    tol: float = 1e-15,
) -> Dict[int, complex]:
    """Sparse statevector as ``{index: amplitude}`` (qubit 0 most significant)."""
    n = circuit.n_qubits
    if initial is None:
        state = {0: 1.0 + 0j}
    else:
        state = {int(b, 2): complex(a) for b, a in initial.items()}
    for i, g in enumerate(circuit.gates):
        state = _apply_sparse(state, n, g, tol)
        if observer is not None:
            observer(i, state)
    return state


def sparse_to_dense(state: Dict[int, complex], n_qubits: int) -> np.ndarray:
    psi = np.zeros(2**n_qubits, dtype=complex)
    for k, v in state.items():
        psi[k] = v
    return psi


def sparse_overlap(a: Dict[int, complex], b: Dict[int, complex]) -> complex:
    """``<a|b>`` for two sparse states."""
    return sum(np.conj(v) * b.get(k, 0.0) for k, v in a.items())
