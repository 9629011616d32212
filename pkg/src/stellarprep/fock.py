"""Truncated Fock-space linear algebra.

Operators here act on ``n_modes`` bosonic modes with at most ``lam`` quanta
per mode.  Mode 0 is the most significant factor of the tensor product, so a
basis index is the base-``(lam+1)`` number whose digits are the occupations
``(n_0, ..., n_{N-1})``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

#: Largest Hilbert dimension any constructor will accept.
MAX_DIM = 2**24
#: Operators at or below this dimension are stored densely.
DENSE_LIMIT = 2**14


@dataclass(frozen=True)
class FockCutoff:
    """Boson-number cutoff ``lam`` per mode on ``n_modes`` modes."""

    lam: int
    n_modes: int = 1

    def __post_init__(self):
        if int(self.lam) != self.lam or self.lam < 0:
            raise ValueError(f"cutoff must be a non-negative integer, got {self.lam}")
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ValueError(f"n_modes must be a positive integer, got {self.n_modes}")
        if (self.lam + 1) ** self.n_modes > MAX_DIM:
            raise MemoryError(
                f"Hilbert dimension {self.lam + 1}^{self.n_modes} exceeds guard {MAX_DIM}"
            )

    @property
    def local_dim(self) -> int:
        return self.lam + 1

    @property
    def dim(self) -> int:
        return (self.lam + 1) ** self.n_modes

    def index(self, occupations) -> int:
        """Basis index of an occupation vector."""
        idx = 0
        for n in occupations:
            if not 0 <= n <= self.lam:
                raise ValueError(f"occupation {n} outside [0, {self.lam}]")
            idx = idx * (self.lam + 1) + int(n)
        return idx

    def occupations(self, index: int) -> tuple:
        """Occupation vector of a basis index (inverse of :meth:`index`)."""
        out = []
        for _ in range(self.n_modes):
            index, n = divmod(index, self.lam + 1)
            out.append(n)
        return tuple(reversed(out))


@dataclass
class TruncatedOperator:
    """Matrix acting on the truncated Fock space of ``cutoff``.

    ``entries`` is a dense ndarray for small spaces and a CSR matrix otherwise.
    """

    cutoff: FockCutoff
    entries: object
    hermitian: bool = False

    def __post_init__(self):
        d = self.cutoff.dim
        if self.entries.shape != (d, d):
            raise ValueError(f"operator shape {self.entries.shape} does not match dimension {d}")
        if d <= DENSE_LIMIT and sp.issparse(self.entries):
            self.entries = self.entries.toarray()
        elif d > DENSE_LIMIT and not sp.issparse(self.entries):
            self.entries = sp.csr_matrix(self.entries)
        if self.hermitian and self.hermiticity_defect() > 1e-12:
            raise ValueError("operator claimed Hermitian but ||M - M^dag|| > 1e-12")

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.entries)

    def dense(self) -> np.ndarray:
        return self.entries.toarray() if self.is_sparse else np.asarray(self.entries)

    def hermiticity_defect(self) -> float:
        diff = self.entries - self.entries.conj().T
        if sp.issparse(diff):
            return float(abs(diff).max()) if diff.nnz else 0.0
        return float(np.max(np.abs(diff))) if diff.size else 0.0

    def adjoint(self) -> "TruncatedOperator":
        return TruncatedOperator(self.cutoff, self.entries.conj().T, self.hermitian)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.entries @ vec

    def expectation(self, vec: np.ndarray) -> complex:
        """``<v|M|v> / <v|v>``."""
        vec = np.asarray(vec)
        return complex(np.vdot(vec, self.entries @ vec) / np.vdot(vec, vec))

    def _check(self, other):
        if not isinstance(other, TruncatedOperator) or other.cutoff != self.cutoff:
            raise ValueError("operators live on different truncated spaces")

    def __matmul__(self, other):
        if isinstance(other, TruncatedOperator):
            self._check(other)
            return TruncatedOperator(self.cutoff, self.entries @ other.entries)
        return self.entries @ other

    def __add__(self, other):
        self._check(other)
        return TruncatedOperator(
            self.cutoff, self.entries + other.entries, self.hermitian and other.hermitian
        )

    def __sub__(self, other):
        self._check(other)
        return TruncatedOperator(
            self.cutoff, self.entries - other.entries, self.hermitian and other.hermitian
        )

    def __mul__(self, scalar):
        herm = self.hermitian and np.isreal(scalar)
        return TruncatedOperator(self.cutoff, self.entries * scalar, bool(herm))

    __rmul__ = __mul__

    def power(self, k: int) -> "TruncatedOperator":
        out = self.entries
        for _ in range(k - 1):
            out = out @ self.entries
        if k == 0:
            out = _identity(self.cutoff.dim, sp.issparse(self.entries))
        return TruncatedOperator(self.cutoff, out, self.hermitian)


@dataclass
class Spectrum:
    """Ground energy, first relevant excitation and ground vector."""

    e0: float
    e1: float
    ground: np.ndarray
    energies: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.e1 < self.e0 - 1e-12:
            raise ValueError("e1 below e0")
        nrm = np.linalg.norm(self.ground)
        if abs(nrm - 1.0) > 1e-12:
            self.ground = self.ground / nrm

    @property
    def gap(self) -> float:
        return self.e1 - self.e0


def _identity(d, sparse):
    return sp.identity(d, format="csr", dtype=complex) if sparse else np.eye(d, dtype=complex)


def single_mode_annihilation(lam: int) -> np.ndarray:
    """Dense ``(lam+1)``-dimensional truncated annihilation matrix."""
    return np.diag(np.sqrt(np.arange(1, lam + 1, dtype=float)), 1)


def embed(local: np.ndarray, cutoff: FockCutoff, mode: int):
    """Place a single-mode matrix on ``mode`` with identities elsewhere."""
    if not 0 <= mode < cutoff.n_modes:
        raise IndexError(f"mode {mode} out of range for {cutoff.n_modes} modes")
    d = cutoff.local_dim
    if cutoff.n_modes == 1:
        return np.asarray(local, dtype=complex)
    left = sp.identity(d**mode, format="csr")
    right = sp.identity(d ** (cutoff.n_modes - mode - 1), format="csr")
    mat = sp.kron(sp.kron(left, sp.csr_matrix(local)), right, format="csr").astype(complex)
    return mat.toarray() if cutoff.dim <= DENSE_LIMIT else mat


def ladder_ops(cutoff: FockCutoff, mode: int = 0):
    """Truncated ``(a, a_dag)`` on ``mode``."""
    a = single_mode_annihilation(cutoff.lam)
    return (
        TruncatedOperator(cutoff, embed(a, cutoff, mode)),
        TruncatedOperator(cutoff, embed(a.T, cutoff, mode)),
    )


def quadratures(cutoff: FockCutoff, mode: int = 0):
    """Truncated ``(phi, pi)`` with ``a = (phi + i pi)/sqrt(2)``."""
    a = single_mode_annihilation(cutoff.lam)
    phi = (a + a.T) / np.sqrt(2.0)
    pi = 1j * (a.T - a) / np.sqrt(2.0)
    return (
        TruncatedOperator(cutoff, embed(phi, cutoff, mode), hermitian=True),
        TruncatedOperator(cutoff, embed(pi, cutoff, mode), hermitian=True),
    )


def number_op(cutoff: FockCutoff, mode: int = 0) -> TruncatedOperator:
    n = np.diag(np.arange(cutoff.lam + 1, dtype=float))
    return TruncatedOperator(cutoff, embed(n, cutoff, mode), hermitian=True)


def hamiltonian_0p1(sigma: float, lambda_coupling: float, cutoff: FockCutoff) -> TruncatedOperator:
    """Anharmonic oscillator ``pi^2/2 + sigma phi^2/2 + lambda phi^4``."""
    if cutoff.n_modes != 1:
        raise ValueError("single-mode Hamiltonian needs n_modes == 1")
    if lambda_coupling < 0:
        raise ValueError("lambda must be non-negative")
    phi, pi = quadratures(cutoff)
    p = phi.dense().real
    q = (pi.dense() @ pi.dense()).real
    p2 = p @ p
    h = q / 2 + sigma * p2 / 2 + lambda_coupling * (p2 @ p2)
    return TruncatedOperator(cutoff, h.astype(complex), hermitian=True)


def hamiltonian_1p1(m_sq: float, lambda_coupling: float, cutoff: FockCutoff) -> TruncatedOperator:
    """Periodic lattice Hamiltonian

    ``sum_j [pi_j^2/2 + (phi_{j+1}-phi_j)^2/2 + m^2 phi_j^2/2 + lambda phi_j^4/4]``.
    """
    n = cutoff.n_modes
    if n < 2:
        raise ValueError("lattice Hamiltonian needs at least two sites")
    a = single_mode_annihilation(cutoff.lam)
    phi1 = (a + a.T) / np.sqrt(2.0)
    pi2 = -((a.T - a) @ (a.T - a)) / 2.0
    phi2 = phi1 @ phi1
    # on-site part, with the (phi_{j+1}-phi_j)^2/2 diagonal pieces folded in
    onsite = pi2 / 2 + (1.0 + m_sq / 2.0) * phi2 + lambda_coupling / 4.0 * (phi2 @ phi2)
    phis = [sp.csr_matrix(embed(phi1, cutoff, j)) for j in range(n)]
    h = sp.csr_matrix((cutoff.dim, cutoff.dim), dtype=complex)
    for j in range(n):
        h = h + sp.csr_matrix(embed(onsite, cutoff, j))
    # each nearest-neighbour bond appears once; N = 2 has two bonds on the same pair
    for j in range(n):
        h = h - phis[j] @ phis[(j + 1) % n]
    h = h.tocsr()
    return TruncatedOperator(cutoff, h, hermitian=True)


def total_occupation(cutoff: FockCutoff) -> np.ndarray:
    """Total boson number of every basis index."""
    d = cutoff.local_dim
    idx = np.arange(cutoff.dim)
    tot = np.zeros(cutoff.dim, dtype=np.int64)
    for _ in range(cutoff.n_modes):
        idx, rem = np.divmod(idx, d)
        tot += rem
    return tot


def parity_operator(cutoff: FockCutoff) -> TruncatedOperator:
    """``(-1)^{total boson number}`` as a diagonal operator."""
    occ = total_occupation(cutoff)
    diag = np.where(occ % 2 == 0, 1.0, -1.0)
    return TruncatedOperator(cutoff, sp.diags(diag.astype(complex), format="csr"), hermitian=True)


def _permutation_operator(cutoff: FockCutoff, perm) -> TruncatedOperator:
    d = cutoff.local_dim
    n = cutoff.n_modes
    idx = np.arange(cutoff.dim)
    digits = np.stack([(idx // d ** (n - 1 - k)) % d for k in range(n)])
    new_digits = np.empty_like(digits)
    for src, dst in enumerate(perm):
        new_digits[dst] = digits[src]
    new_idx = np.zeros(cutoff.dim, dtype=np.int64)
    for k in range(n):
        new_idx = new_idx * d + new_digits[k]
    mat = sp.csr_matrix((np.ones(cutoff.dim, dtype=complex), (new_idx, idx)), shape=(cutoff.dim,) * 2)
    return TruncatedOperator(cutoff, mat)


def shift_operator(cutoff: FockCutoff) -> TruncatedOperator:
    """Cyclic translation sending the occupation of site ``j`` to site ``j+1``."""
    n = cutoff.n_modes
    return _permutation_operator(cutoff, [(j + 1) % n for j in range(n)])


def inversion_operator(cutoff: FockCutoff) -> TruncatedOperator:
    """Lattice reflection ``j -> -j mod N``."""
    n = cutoff.n_modes
    return _permutation_operator(cutoff, [(-j) % n for j in range(n)])


def squeeze_generator(lam: int) -> np.ndarray:
    """Real antisymmetric ``((a_dag)^2 - a^2)/2`` on one truncated mode."""
    a = single_mode_annihilation(lam)
    a2 = a @ a
    return (a2.T - a2) / 2.0


def squeeze_matrix(r: float, cutoff: FockCutoff | int) -> TruncatedOperator:
    """Truncated squeezer ``exp(r/2 [(a_dag)^2 - a^2])`` by exact matrix exponential."""
    if isinstance(cutoff, int):
        cutoff = FockCutoff(cutoff, 1)
    if cutoff.n_modes != 1:
        raise ValueError("squeeze_matrix is single-mode")
    u = sla.expm(r * squeeze_generator(cutoff.lam))
    return TruncatedOperator(cutoff, u.astype(complex))


def squeezed_fock_distribution(
    r: float,
    n1: int,
    n2_max: int,
    tol: float = 1e-12,
    max_doublings: int = 8,
) -> np.ndarray:
    """``|<n2|S(r)|n1>|^2`` for ``n2 = 0..n2_max`` for the untruncated squeezer.

    The untruncated operator is approximated by truncated ones at a reference
    cutoff that is doubled until the returned probabilities (and the tail mass
    beyond ``n2_max``) move by less than ``tol``.
    """
    if n1 < 0:
        raise ValueError("n1 must be non-negative")
    m = max(64, 2 * (n1 + n2_max) + 32)
    prev = None
    for _ in range(max_doublings + 1):
        col = sla.expm(r * squeeze_generator(m))[:, n1]
        probs = np.abs(col) ** 2
        cur = np.concatenate([probs[: n2_max + 1], [probs[n2_max + 1 :].sum()]])
        if prev is not None and np.max(np.abs(cur - prev)) < tol:
            return cur[:-1]
        prev = cur
        m *= 2
    raise RuntimeError("squeezed Fock distribution did not converge")


def leak_probability(r: float, n1: int, lam: int, tol: float = 1e-12) -> float:
    """Weight of ``S(r)|n1>`` above ``lam`` quanta, summed directly over the tail."""
    m = max(64, 2 * (n1 + lam) + 32)
    prev = None
    for _ in range(9):
        col = sla.expm(r * squeeze_generator(m))[:, n1]
        # drop the top rows, where truncation of the reference itself shows up
        tail = float(np.sum(np.abs(col[lam + 1 : m - m // 4]) ** 2))
        if prev is not None and abs(tail - prev) < tol:
            return tail
        prev = tail
        m *= 2
    raise RuntimeError("leakage did not converge")


def exact_ground(
    H: TruncatedOperator,
    symmetry_sector: Optional[str] = None,
    n_states: int = 4,
) -> Spectrum:
    """Lowest eigenpairs of ``H``.

    ``symmetry_sector`` may be ``"even"`` or ``"odd"`` to restrict to one
    boson-parity sector; then ``e1`` is the next level inside that sector.
    Otherwise ``e1`` is the first excited level of the full spectrum.
    """
    if not (H.hermitian or H.hermiticity_defect() <= 1e-12):
        raise ValueError("exact_ground needs a Hermitian operator")
    cut = H.cutoff
    keep = None
    if symmetry_sector is not None:
        if symmetry_sector not in ("even", "odd"):
            raise ValueError("symmetry_sector must be 'even' or 'odd'")
        occ = total_occupation(cut)
        keep = np.flatnonzero(occ % 2 == (0 if symmetry_sector == "even" else 1))
    mat = H.entries
    if keep is not None:
        mat = mat[keep][:, keep]
    dim = mat.shape[0]
    if not sp.issparse(mat) or dim <= 2000:
        dense = mat.toarray() if sp.issparse(mat) else mat
        if np.allclose(dense.imag, 0.0):
            dense = dense.real
        w, v = np.linalg.eigh(dense)
    else:
        k = min(n_states, dim - 2)
        if abs(mat - mat.conj()).max() == 0:
            mat = mat.real
        v0 = np.ones(dim) / np.sqrt(dim)
        w, v = spla.eigsh(mat, k=k, which="SA", tol=1e-13, v0=v0, maxiter=20 * dim)
        order = np.argsort(w)
        w, v = w[order], v[:, order]
    ground = np.zeros(cut.dim, dtype=complex)
    if keep is None:
        ground[:] = v[:, 0]
    else:
        ground[keep] = v[:, 0]
    return Spectrum(float(w[0]), float(w[1]), ground, np.asarray(w[:n_states]))


def fidelity(psi: np.ndarray, chi: np.ndarray) -> float:
    """``|<psi|chi>|^2`` after normalising both vectors."""
    psi = np.asarray(psi)
    chi = np.asarray(chi)
    if psi.shape != chi.shape:
        raise ValueError("vectors differ in dimension")
    npsi, nchi = np.linalg.norm(psi), np.linalg.norm(chi)
    if npsi == 0 or nchi == 0:
        raise ValueError("zero vector has no fidelity")
    return float(min(1.0, abs(np.vdot(psi, chi)) ** 2 / (npsi * nchi) ** 2))


def cutoff_converged(fn, lam0: int, tol: float = 1e-8, lam_max: int = 400) -> tuple:
    """Double the cutoff from ``lam0`` until the scalar ``fn(lam)`` moves by < ``tol``.

    Returns ``(lam, value)`` at the converged cutoff.
    """
    lam = lam0
    prev = fn(lam)
    while 2 * lam <= lam_max:
        lam *= 2
        cur = fn(lam)
        if abs(cur - prev) < tol:
            return lam, cur
        prev = cur
    raise RuntimeError(f"no convergence up to cutoff {lam_max}")
