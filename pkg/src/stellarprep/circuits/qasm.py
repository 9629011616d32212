"""OpenQASM 2.0 export and a reader for the emitted subset.

Only ``x, h, s, sdg, cx, rx, ry, rz`` appear in the output.  Two-qubit Pauli
rotations become a CNOT/``rz`` sandwich in a rotated basis, and controlled
rotations become a Gray-code chain of ``ry`` and ``cx`` (``2**k`` CNOTs for
``k`` controls; exact, ancilla free).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .gates import PAULI, Gate, GateCircuit, rotation_matrix

HEADER = 'OPENQASM 2.0;\ninclude "qelib1.inc";\n'
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_S = np.diag([1, 1j])
_FIXED = {"x": PAULI["X"], "h": _H, "s": _S, "sdg": _S.conj().T}
MAX_EXPORT_CONTROLS = 14


def _fmt(a: float) -> str:
    return repr(float(a))


def _q(i: int) -> str:
    return f"q[{i}]"


def _gray_mc_rotation(axis: str, target: int, controls: Tuple[int, ...], angle: float) -> List[str]:
    """Rotation on ``target`` when every control is 1, as a uniformly controlled chain."""
    k = len(controls)
    if k == 0:
        return [f"r{axis.lower()}({_fmt(angle)}) {_q(target)};"]
    if axis == "X":
        # conjugate an Z rotation by Hadamards
        return [f"h {_q(target)};"] + _gray_mc_rotation("Z", target, controls, angle) + [f"h {_q(target)};"]
    lines = []
    size = 2**k
    for i in range(size):
        g = i ^ (i >> 1)
        sign = -1.0 if bin(g).count("1") % 2 else 1.0
        lines.append(f"r{axis.lower()}({_fmt(sign * angle / size)}) {_q(target)};")
        g_next = (i + 1) % size
        g_next ^= g_next >> 1
        bit = (g ^ g_next).bit_length() - 1
        # bit p of the Gray code belongs to controls[k - 1 - p]
        lines.append(f"cx {_q(controls[k - 1 - bit])},{_q(target)};")
    return lines


def _gate_lines(g: Gate) -> List[str]:
    if g.kind == "x":
        return [f"x {_q(g.qubits[0])};"]
    if g.kind == "cx":
        return [f"cx {_q(g.qubits[0])},{_q(g.qubits[1])};"]
    if g.kind == "rot":
        return [f"r{g.axis.lower()}({_fmt(g.angle)}) {_q(g.qubits[0])};"]
    if g.kind == "mcrot":
        if len(g.controls) > MAX_EXPORT_CONTROLS:
            raise ValueError("too many controls for the Gray-code expansion")
        flips = [f"x {_q(c)};" for c, v in zip(g.controls, g.control_values) if not v]
        return flips + _gray_mc_rotation(g.axis, g.qubits[0], g.controls, g.angle) + flips
    a, b = g.qubits
    pre, post = [], []
    for q, p in zip((a, b), g.paulis):
        if p == "X":
            pre.append(f"h {_q(q)};")
            post.append(f"h {_q(q)};")
        elif p == "Y":
            pre += [f"sdg {_q(q)};", f"h {_q(q)};"]
            post += [f"h {_q(q)};", f"s {_q(q)};"]
    mid = [f"cx {_q(a)},{_q(b)};", f"rz({_fmt(2 * g.angle)}) {_q(b)};", f"cx {_q(a)},{_q(b)};"]
    return pre + mid + post


def export_qasm(circuit: GateCircuit) -> str:
    lines = [f"qreg q[{circuit.n_qubits}];"] if circuit.gates or circuit.n_qubits else []
    for g in circuit.gates:
        lines.extend(_gate_lines(g))
    return HEADER + "".join(line + "\n" for line in lines)


@dataclass(frozen=True)
class _MatrixGate:
    targets: Tuple[int, ...]
    matrix: np.ndarray
    controls: Tuple[int, ...] = ()

    @property
    def operands(self):
        return self.targets + self.controls

    def local_action(self):
        return self.targets, self.matrix, self.controls, (1,) * len(self.controls)


_ANGLE_OK = re.compile(r"^[0-9eE+\-*/(). pi]+$")
_LINE = re.compile(r"^(\w+)(?:\(([^)]*)\))?\s+(.+);$")


def _angle(text: str) -> float:
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    if not _ANGLE_OK.match(text):
        raise ValueError(f"unsupported angle expression {text!r}")
    return float(eval(text, {"__builtins__": {}}, {"pi": math.pi}))


def import_qasm(text: str) -> Tuple[int, List[_MatrixGate]]:
    """Parse the subset written by :func:`export_qasm`."""
    n = None
    ops: List[_MatrixGate] = []
    for raw in text.splitlines():
        line = raw.split("//")[0].strip()
        if not line or line.startswith("OPENQASM") or line.startswith("include"):
            continue
        m = re.match(r"^qreg\s+q\[(\d+)\];$", line)
        if m:
            n = int(m.group(1))
            continue
        m = _LINE.match(line)
        if not m:
            raise ValueError(f"cannot parse {raw!r}")
        name, arg, qs = m.groups()
        qubits = tuple(int(x) for x in re.findall(r"q\[(\d+)\]", qs))
        if name in _FIXED:
            ops.append(_MatrixGate(qubits, _FIXED[name]))
        elif name in ("rx", "ry", "rz"):
            ops.append(_MatrixGate(qubits, rotation_matrix(name[1].upper(), _angle(arg))))
        elif name == "cx":
            ops.append(_MatrixGate(qubits[1:], PAULI["X"], qubits[:1]))
        else:
            raise ValueError(f"unsupported gate {name!r}")
    if n is None:
        raise ValueError("no qreg declaration")
    return n, ops


class _OpList:
    def __init__(self, n, gates):
        self.n_qubits = n
        self.gates = gates


def simulate_qasm(text: str, sparse: bool = False):
    """Statevector of a QASM program from ``|0...0>``; dict form when ``sparse``."""
    from .simulate import simulate, simulate_sparse

    n, ops = import_qasm(text)
    circ = _OpList(n, ops)
    return simulate_sparse(circ) if sparse else simulate(circ)
