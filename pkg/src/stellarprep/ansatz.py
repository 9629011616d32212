"""Finite-stellar-rank ansatzes and their exact expectation values.

The ansatz is ``prod_j S_j(r) |C>`` with ``|C> = P(phi) |0>`` for a real
polynomial ``P`` that is a sum over lattice sites of monomials of rank ``<= R``
and span ``<= Q``.  Monomials related by translation or reflection share one
coefficient; such a class is an :class:`Orbit`.

Since ``S(r)^dag phi S(r) = e^r phi`` and ``S(r)^dag pi S(r) = e^{-r} pi``,
every expectation value reduces to vacuum matrix elements
``<0| P(phi) O(e^r phi, e^{-r} pi) P(phi) |0>``.  For a fixed template and
observable that is ``exp(k r)`` times a quadratic form in the orbit
coefficients; the form is computed once, exactly, from single-site vacuum
elements, and cached.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.optimize as so

from .fock import FockCutoff, quadratures, single_mode_annihilation, squeeze_generator

Occ = Tuple[int, ...]

#: Names used for the rank-4, span-2 family; other orbits get pattern labels.
KNOWN_LABELS = {
    (0,): "A",
    (2,): "B0",
    (1, 1): "B1",
    (1, 0, 1): "B2",
    (4,): "C0",
    (1, 3): "C11",
    (2, 2): "C12",
    (1, 0, 3): "C21",
    (1, 1, 2): "C22",
    (1, 2, 1): "C23",
    (2, 0, 2): "C24",
}


def pattern_label(pattern: Occ) -> str:
    return KNOWN_LABELS.get(tuple(pattern), "d[" + ",".join(map(str, pattern)) + "]")


def core_size(R: int, Q: int) -> int:
    """Closed-form count of monomials per site, ``|c_{R,Q}|``."""
    return 1 + sum(
        math.comb(rr + qq - 2, qq) for rr in range(2, R + 1, 2) for qq in range(Q + 1)
    )


@dataclass(frozen=True)
class Orbit:
    """Window patterns sharing one coefficient (a pattern and its mirror image)."""

    label: str
    patterns: Tuple[Occ, ...]

    @property
    def representative(self) -> Occ:
        return self.patterns[0]

    @property
    def degree(self) -> int:
        return sum(self.patterns[0])

    @property
    def span(self) -> int:
        return len(self.patterns[0]) - 1


@dataclass(frozen=True)
class CoreTemplate:
    """Orbit structure of the symmetric rank-``R``, span-``Q`` core on ``N`` sites."""

    R: int
    Q: int
    N: int
    orbits: Tuple[Orbit, ...]

    @property
    def n_orbits(self) -> int:
        return len(self.orbits)

    @property
    def monomials_per_site(self) -> int:
        return sum(len(o.patterns) for o in self.orbits)

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(o.label for o in self.orbits)

    def orbit_index(self, label: str) -> int:
        return self.labels.index(label)


def _window_patterns(R_: int, Q_: int):
    """Occupation windows of length ``Q_+1`` summing to ``R_`` with occupied edges."""
    if Q_ == 0:
        yield (R_,)
        return
    for inner in itertools.product(range(R_ + 1), repeat=Q_ + 1):
        if sum(inner) == R_ and inner[0] >= 1 and inner[-1] >= 1:
            yield tuple(inner)


@functools.lru_cache(maxsize=None)
def enumerate_core_template(R: int, Q: int, N: int) -> CoreTemplate:
    """Enumerate orbits ordered by rank, then span, then pattern lexicographically."""
    if R < 0 or R % 2:
        raise ValueError(f"rank must be even and non-negative, got {R}")
    if N < 1:
        raise ValueError("need at least one site")
    if Q < 0 or Q > N // 2:
        raise ValueError(f"span {Q} outside [0, floor(N/2)] for N={N}")
    orbits = [Orbit("A", ((0,),))]
    for R_ in range(2, R + 1, 2):
        for Q_ in range(Q + 1):
            seen = set()
            for pat in sorted(_window_patterns(R_, Q_)):
                if pat in seen:
                    continue
                mirror = pat[::-1]
                seen.update({pat, mirror})
                pats = (pat,) if mirror == pat else (pat, mirror)
                orbits.append(Orbit(pattern_label(pat), pats))
    tmpl = CoreTemplate(R, Q, N, tuple(orbits))
    assert tmpl.monomials_per_site == core_size(R, Q)
    return tmpl


def orbit_expansion(template: CoreTemplate, orbit: Orbit) -> Dict[Occ, float]:
    """Translation sum of an orbit as ``{occupation vector: multiplicity}``.

    Placements that coincide on small lattices (``N = 2Q``) add up.
    """
    N = template.N
    out: Dict[Occ, float] = {}
    for pat in orbit.patterns:
        for j in range(N):
            occ = [0] * N
            for k, n in enumerate(pat):
                occ[(j + k) % N] += n
            key = tuple(occ)
            out[key] = out.get(key, 0.0) + 1.0
    return out


@dataclass
class CoreState:
    """Real orbit coefficients of a core polynomial written in ``phi``."""

    template: CoreTemplate
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if self.coeffs.size != self.template.n_orbits:
            raise ValueError(
                f"expected {self.template.n_orbits} coefficients, got {self.coeffs.size}"
            )
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("core coefficients must be finite")

    @classmethod
    def vacuum(cls, template: CoreTemplate) -> "CoreState":
        c = np.zeros(template.n_orbits)
        c[0] = 1.0
        return cls(template, c)

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(self.template.labels, map(float, self.coeffs)))

    def phi_polynomial(self) -> Dict[Occ, float]:
        """Expanded ``{occupation: coefficient}`` of ``P(phi)``."""
        poly: Dict[Occ, float] = {}
        for c, orb in zip(self.coeffs, self.template.orbits):
            if c == 0.0:
                continue
            for occ, mult in orbit_expansion(self.template, orb).items():
                poly[occ] = poly.get(occ, 0.0) + c * mult
        return {k: v for k, v in poly.items() if v != 0.0}

    def ladder_polynomial(self) -> Dict[Occ, float]:
        """Coefficients ``c'_n`` with ``|C> = sum_n c'_n (a_dag)^n |0>``."""
        return phi_to_ladder(self.phi_polynomial())

    def fock_amplitudes(self, normalize: bool = True) -> Dict[Occ, float]:
        """Amplitudes of ``|C>`` on normalised Fock states ``|n>``."""
        amps = {
            n: c * math.sqrt(math.prod(math.factorial(k) for k in n))
            for n, c in self.ladder_polynomial().items()
        }
        amps = {k: v for k, v in amps.items() if abs(v) > 0.0}
        if normalize:
            nrm = math.sqrt(sum(v * v for v in amps.values()))
            if nrm == 0.0:
                raise ValueError("core state has zero norm")
            amps = {k: v / nrm for k, v in amps.items()}
        return amps


@dataclass
class AnsatzParams:
    """Squeezing parameter ``r`` together with a core state."""

    r: float
    core: CoreState

    def __post_init__(self):
        if not np.isfinite(self.r):
            raise ValueError("r must be finite")

    @property
    def template(self) -> CoreTemplate:
        return self.core.template

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.r], self.core.coeffs])

    @classmethod
    def from_vector(cls, template: CoreTemplate, x: Sequence[float]) -> "AnsatzParams":
        x = np.asarray(x, dtype=float)
        return cls(float(x[0]), CoreState(template, x[1:]))

    def normalized(self) -> "AnsatzParams":
        """Copy with the core rescaled to unit norm and a positive constant term."""
        c = self.core.coeffs
        nrm = math.sqrt(float(c @ gram_matrix(self.template) @ c))
        if nrm == 0.0:
            raise ValueError("core has zero norm")
        sign = -1.0 if c[0] < 0 else 1.0
        return AnsatzParams(self.r, CoreState(self.template, sign * c / nrm))


@dataclass(frozen=True)
class ObservableSpec:
    """Product of ``phi_j^p pi_j^q`` factors, in the written order."""

    factors: Tuple[Tuple[int, int, int], ...]

    def __post_init__(self):
        fac = tuple(tuple(int(v) for v in f) for f in self.factors)
        for j, p, q in fac:
            if j < 0 or p < 0 or q < 0:
                raise ValueError(f"bad factor {(j, p, q)}")
        object.__setattr__(self, "factors", fac)

    @classmethod
    def phi(cls, power: int, site: int = 0) -> "ObservableSpec":
        return cls(((site, power, 0),))

    @classmethod
    def pi(cls, power: int, site: int = 0) -> "ObservableSpec":
        return cls(((site, 0, power),))

    @classmethod
    def phi_pi(cls, p: int, q: int, site: int = 0) -> "ObservableSpec":
        return cls(((site, p, q),))

    @classmethod
    def two_point(cls, j: int) -> "ObservableSpec":
        if j == 0:
            return cls(((0, 2, 0),))
        return cls(((0, 1, 0), (j, 1, 0)))

    @property
    def scaling(self) -> int:
        """Exponent ``k`` in the ``exp(k r)`` factor produced by the squeezers."""
        return sum(p - q for _, p, q in self.factors)

    @property
    def degree(self) -> int:
        return sum(p + q for _, p, q in self.factors)

    def sites(self) -> Tuple[int, ...]:
        return tuple(sorted({j for j, _, _ in self.factors}))

    def local_factors(self, site: int) -> Tuple[Tuple[int, int], ...]:
        return tuple((p, q) for j, p, q in self.factors if j == site)

    def name(self) -> str:
        parts = []
        for j, p, q in self.factors:
            s = ""
            if p:
                s += f"phi{j}^{p}" if p > 1 else f"phi{j}"
            if q:
                s += f"pi{j}^{q}" if q > 1 else f"pi{j}"
            parts.append(s or "1")
        return "*".join(parts) or "1"


IDENTITY = ObservableSpec(())


@functools.lru_cache(maxsize=None)
def _local_matrices(dim: int):
    a = single_mode_annihilation(dim - 1)
    phi = (a + a.T) / np.sqrt(2.0)
    pi = 1j * (a.T - a) / np.sqrt(2.0)
    return phi, pi


@functools.lru_cache(maxsize=None)
def local_vacuum_element(a: int, ops: Tuple[Tuple[int, int], ...], b: int) -> complex:
    """``<0| phi^a [prod phi^p pi^q] phi^b |0>`` on one mode, exactly.

    A Fock block of dimension ``a + b + deg + 1`` is large enough that no
    intermediate state touches the truncation edge.
    """
    deg = a + b + sum(p + q for p, q in ops)
    if deg % 2:
        return 0.0
    if not ops:
        n = a + b
        return float(math.prod(range(n - 1, 0, -2))) / 2 ** (n // 2) if n else 1.0
    dim = deg + 2
    phi, pi = _local_matrices(dim)
    vec = np.zeros(dim, dtype=complex)
    vec[0] = 1.0
    for _ in range(b):
        vec = phi @ vec
    for p, q in reversed(ops):
        for _ in range(q):
            vec = pi @ vec
        for _ in range(p):
            vec = phi @ vec
    for _ in range(a):
        vec = phi @ vec  # phi is Hermitian, so <0|phi^a = (phi^a|0>)^dag
    bra = np.zeros(dim)
    bra[0] = 1.0
    val = complex(bra @ vec)
    return val.real if abs(val.imag) < 1e-15 else val


def _pair_element(u: Occ, v: Occ, obs: ObservableSpec) -> complex:
    val = 1.0 + 0j
    sites = set(i for i, n in enumerate(u) if n) | set(i for i, n in enumerate(v) if n)
    sites |= set(obs.sites())
    for s in sites:
        val *= local_vacuum_element(u[s], obs.local_factors(s), v[s])
        if val == 0:
            return 0.0
    return val


@functools.lru_cache(maxsize=4096)
def quadratic_form(template: CoreTemplate, obs: ObservableSpec) -> np.ndarray:
    """Matrix ``M[o, o'] = <0| B_o O B_o' |0>`` at ``r = 0``."""
    for s in obs.sites():
        if s >= template.N:
            raise ValueError(f"observable site {s} outside lattice of {template.N}")
    expansions = [orbit_expansion(template, o) for o in template.orbits]
    n = template.n_orbits
    mat = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for k in range(n):
            acc = 0.0 + 0j
            for u, mu in expansions[i].items():
                for v, mv in expansions[k].items():
                    acc += mu * mv * _pair_element(u, v, obs)
            mat[i, k] = acc
    if np.max(np.abs(mat.imag)) < 1e-14:
        mat = mat.real
    return mat


def gram_matrix(template: CoreTemplate) -> np.ndarray:
    return quadratic_form(template, IDENTITY)


def expectation(params: AnsatzParams, obs: ObservableSpec) -> complex:
    """``<psi|O|psi>/<psi|psi>`` for the untruncated ansatz."""
    c = params.core.coeffs
    num = c @ quadratic_form(params.template, obs) @ c
    den = c @ gram_matrix(params.template) @ c
    if den <= 0:
        raise ValueError("core state has zero norm")
    val = np.exp(obs.scaling * params.r) * num / den
    return complex(val)


def expectation_real(params: AnsatzParams, obs: ObservableSpec) -> float:
    return float(expectation(params, obs).real)


# ---------------------------------------------------------------------------
# Hamiltonians as sums of observables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OscillatorModel:
    """Single mode ``pi^2/2 + sigma phi^2/2 + lambda phi^4``."""

    sigma: float
    lambda_coupling: float
    N: int = field(default=1, init=False)

    def terms(self):
        return (
            (0.5, ObservableSpec.pi(2)),
            (0.5 * self.sigma, ObservableSpec.phi(2)),
            (self.lambda_coupling, ObservableSpec.phi(4)),
        )

    def hamiltonian(self, lam: int):
        from .fock import hamiltonian_0p1

        return hamiltonian_0p1(self.sigma, self.lambda_coupling, FockCutoff(lam, 1))


@dataclass(frozen=True)
class LatticeModel:
    """Periodic lattice ``phi^4`` chain on ``N`` sites; energies are totals."""

    m_sq: float
    lambda_coupling: float
    N: int

    def terms(self):
        n = self.N
        return (
            (0.5 * n, ObservableSpec.pi(2)),
            ((1.0 + 0.5 * self.m_sq) * n, ObservableSpec.phi(2)),
            (-1.0 * n, ObservableSpec.two_point(1)),
            (0.25 * self.lambda_coupling * n, ObservableSpec.phi(4)),
        )

    def hamiltonian(self, lam: int):
        from .fock import hamiltonian_1p1

        return hamiltonian_1p1(self.m_sq, self.lambda_coupling, FockCutoff(lam, self.N))


def energy(params: AnsatzParams, model) -> float:
    """Ansatz energy ``<H>`` assembled from the model's local terms."""
    return float(sum(coef * expectation_real(params, obs) for coef, obs in model.terms()))


def energy_lattice(params: AnsatzParams, m_sq: float, lambda_coupling: float, N: int) -> float:
    return energy(params, LatticeModel(m_sq, lambda_coupling, N))


def energy_matrix(template: CoreTemplate, model, r: float) -> np.ndarray:
    """Quadratic form of ``<H>`` in the core coefficients at squeezing ``r``."""
    h = np.zeros((template.n_orbits,) * 2)
    for coef, obs in model.terms():
        h = h + coef * np.exp(obs.scaling * r) * np.real(quadratic_form(template, obs))
    return h


def lowest_core(template: CoreTemplate, model, r: float):
    """Minimum energy over the core at fixed ``r`` (generalised eigenproblem)."""
    h = energy_matrix(template, model, r)
    g = gram_matrix(template)
    w, v = sla.eigh(g)
    keep = w > 1e-12 * w.max()
    basis = v[:, keep] / np.sqrt(w[keep])
    hw, hv = np.linalg.eigh(basis.T @ h @ basis)
    c = basis @ hv[:, 0]
    if c[0] < 0:
        c = -c
    return float(hw[0]), c


def minimize_energy(
    template: CoreTemplate,
    model,
    r_grid: Optional[Iterable[float]] = None,
) -> Tuple[AnsatzParams, float]:
    """Global minimum-energy ansatz: scan ``r``, then refine a bracketed minimum."""
    if r_grid is None:
        r_grid = np.linspace(-2.0, 2.0, 401)
    r_grid = np.asarray(list(r_grid), dtype=float)
    vals = np.array([lowest_core(template, model, r)[0] for r in r_grid])
    i = int(np.argmin(vals))
    lo = r_grid[max(i - 1, 0)]
    hi = r_grid[min(i + 1, len(r_grid) - 1)]
    res = so.minimize_scalar(
        lambda r: lowest_core(template, model, r)[0],
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    r = float(res.x) if res.fun <= vals[i] else float(r_grid[i])
    e, c = lowest_core(template, model, r)
    return AnsatzParams(r, CoreState(template, c)).normalized(), e


# ---------------------------------------------------------------------------
# Dense state construction (verification path)
# ---------------------------------------------------------------------------


def phi_power_vacuum(n: int, lam: int) -> np.ndarray:
    """``phi^n |0>`` on one mode with cutoff ``lam`` (exact for ``n <= lam``)."""
    a = single_mode_annihilation(lam)
    phi = (a + a.T) / np.sqrt(2.0)
    v = np.zeros(lam + 1)
    v[0] = 1.0
    for _ in range(n):
        v = phi @ v
    return v


def core_vector(core: CoreState, cutoff: FockCutoff) -> np.ndarray:
    """Unnormalised ``P(phi)|0>`` as a dense vector on ``cutoff``."""
    if cutoff.n_modes != core.template.N:
        raise ValueError("cutoff and template disagree on the number of modes")
    if cutoff.lam < core.template.R:
        raise ValueError("cutoff below the core rank")
    if (cutoff.lam + 1) ** cutoff.n_modes > 2**24:
        raise MemoryError("dense core vector too large")
    locs = [phi_power_vacuum(n, cutoff.lam) for n in range(core.template.R + 1)]
    vec = np.zeros(cutoff.dim)
    for occ, coef in core.phi_polynomial().items():
        term = np.array([1.0])
        for n in occ:
            term = np.kron(term, locs[n])
        vec += coef * term
    return vec


def apply_local(vec: np.ndarray, mat: np.ndarray, n_modes: int) -> np.ndarray:
    """Apply the same single-mode matrix to every mode of ``vec``."""
    d = mat.shape[0]
    t = np.asarray(vec).reshape((d,) * n_modes)
    for ax in range(n_modes):
        t = np.moveaxis(np.tensordot(mat, t, axes=([1], [ax])), 0, ax)
    return t.reshape(-1)


def build_state(params: AnsatzParams, cutoff: FockCutoff) -> np.ndarray:
    """Normalised ``prod_j S_j^Lambda(r) P(phi)|0>`` on the truncated space."""
    vec = core_vector(params.core, cutoff)
    s = sla.expm(params.r * squeeze_generator(cutoff.lam))
    out = apply_local(vec, s, cutoff.n_modes)
    return out / np.linalg.norm(out)


def dense_expectation(vec: np.ndarray, obs: ObservableSpec, cutoff: FockCutoff) -> complex:
    """``<vec| O |vec>`` with truncated local factors applied mode by mode."""
    d = cutoff.local_dim
    n = cutoff.n_modes
    a = single_mode_annihilation(cutoff.lam)
    phi = (a + a.T) / np.sqrt(2.0)
    pi = 1j * (a.T - a) / np.sqrt(2.0)
    t = np.asarray(vec, dtype=complex).reshape((d,) * n)
    out = t
    for j, p, q in reversed(obs.factors):
        for mat, k in ((pi, q), (phi, p)):
            for _ in range(k):
                out = np.moveaxis(np.tensordot(mat, out, axes=([1], [j])), 0, j)
    return complex(np.vdot(t, out))


def dense_observable(obs: ObservableSpec, cutoff: FockCutoff):
    """Observable as a matrix on ``cutoff`` (product of truncated factors)."""
    import scipy.sparse as sp

    mat = sp.identity(cutoff.dim, format="csr", dtype=complex)
    for j, p, q in obs.factors:
        phi, pi = quadratures(cutoff, j)
        mat = mat @ phi.power(p).entries @ pi.power(q).entries
    return mat


# ---------------------------------------------------------------------------
# phi <-> a_dag polynomials
# ---------------------------------------------------------------------------


def _hermite_terms(n: int):
    """``phi^n|0> = sum_k h_k (a_dag)^{n-2k}|0>``; yields ``(n - 2k, h_k)``."""
    for k in range(n // 2 + 1):
        h = math.factorial(n) / (math.factorial(k) * math.factorial(n - 2 * k) * 2**k)
        yield n - 2 * k, h * 2 ** (-n / 2)


def phi_to_ladder(poly: Dict[Occ, float]) -> Dict[Occ, float]:
    """Rewrite ``P(phi)|0>`` as ``P'(a_dag)|0>``."""
    out: Dict[Occ, float] = {}
    for occ, coef in poly.items():
        per_site = [list(_hermite_terms(n)) for n in occ]
        for combo in itertools.product(*per_site):
            key = tuple(m for m, _ in combo)
            val = coef * math.prod(h for _, h in combo)
            out[key] = out.get(key, 0.0) + val
    return {k: v for k, v in out.items() if v != 0.0}


def ladder_to_phi(poly: Dict[Occ, float]) -> Dict[Occ, float]:
    """Inverse of :func:`phi_to_ladder`, peeling off the highest total degree first."""
    rest = dict(poly)
    out: Dict[Occ, float] = {}
    while rest:
        top = max(sum(k) for k in rest)
        for occ in [k for k in rest if sum(k) == top]:
            coef = rest.pop(occ)
            if coef == 0.0:
                continue
            d = coef * 2 ** (top / 2)  # leading coefficient of phi^n|0> is 2^{-n/2}
            out[occ] = out.get(occ, 0.0) + d
            for k, v in phi_to_ladder({occ: d}).items():
                if k == occ:
                    continue
                rest[k] = rest.get(k, 0.0) - v
        rest = {k: v for k, v in rest.items() if abs(v) > 0.0}
    return out


# ---------------------------------------------------------------------------
# Gaussian effective potential and moment ratios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GepParams:
    """Free-field ansatz with effective mass ``mu``."""

    mu: float
    N: int

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("effective mass must be positive")

    @property
    def omegas(self) -> np.ndarray:
        k = np.arange(self.N)
        return np.sqrt(self.mu**2 + 4.0 * np.sin(np.pi * k / self.N) ** 2)

    @property
    def chis(self) -> np.ndarray:
        return 0.5 * np.log(self.omegas)


def gep_observables(mu: float, m_sq: float, lambda_coupling: float, N: int) -> dict:
    """Energy and low moments of the GEP state with effective mass ``mu``."""
    g = GepParams(mu, N)
    w = g.omegas
    k = np.arange(N)

    def two_point(j):
        return float(np.mean(np.cos(2 * np.pi * j * k / N) / (2 * w)))

    phi2 = two_point(0)
    pi2 = float(np.mean(w / 2))
    phi4 = 3 * phi2**2
    e = N * (pi2 / 2 + (1 + m_sq / 2) * phi2 - two_point(1) + lambda_coupling / 4 * phi4)
    return {
        "energy": e,
        "phi2": phi2,
        "phi4": phi4,
        "pi2": pi2,
        "two_point": two_point,
        "phi2n": lambda n: double_factorial(2 * n - 1) * phi2**n,
    }


def gep_minimize(m_sq: float, lambda_coupling: float, N: int) -> float:
    """Effective mass minimising the GEP energy."""
    res = so.minimize_scalar(
        lambda lm: gep_observables(math.exp(lm), m_sq, lambda_coupling, N)["energy"],
        bounds=(-8.0, 4.0),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return math.exp(res.x)


def double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def moment_ratio(phi2n: float, phi2: float, n: int) -> float:
    """``<phi^{2n}> / ((2n-1)!! <phi^2>^n)``; equal to one for Gaussian states."""
    if not phi2 > 0:
        raise ZeroDivisionError("second moment must be positive")
    return phi2n / (double_factorial(2 * n - 1) * phi2**n)


# ---------------------------------------------------------------------------
# Text records
# ---------------------------------------------------------------------------


def dumps_params(params: AnsatzParams) -> str:
    t = params.template
    lines = ["# stellarprep ansatz record", f"R {t.R}", f"Q {t.Q}", f"N {t.N}", f"r {params.r!r}"]
    for orb, c in zip(t.orbits, params.core.coeffs):
        pat = ",".join(map(str, orb.representative))
        lines.append(f"orbit {orb.label} {pat} {float(c)!r}")
    return "\n".join(lines) + "\n"


def loads_params(text: str) -> AnsatzParams:
    vals = {}
    coeffs = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "orbit":
            pat = tuple(int(v) for v in parts[2].split(","))
            coeffs[pat] = float(parts[3])
        else:
            vals[parts[0]] = parts[1]
    t = enumerate_core_template(int(vals["R"]), int(vals["Q"]), int(vals["N"]))
    c = np.array([coeffs.get(o.representative, 0.0) for o in t.orbits])
    return AnsatzParams(float(vals["r"]), CoreState(t, c))
