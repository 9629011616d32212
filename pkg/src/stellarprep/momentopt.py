"""Moment-penalised variational optimisation.

The loss is ``<H> + sum_O w_O (<O> - target_O)^2`` evaluated with the exact
expectation engine of :mod:`stellarprep.ansatz`.  Targets come either from
exact diagonalisation (single mode) or from Monte Carlo tables.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.optimize as so

from .ansatz import (
    AnsatzParams,
    CoreState,
    CoreTemplate,
    ObservableSpec,
    energy_matrix,
    gram_matrix,
    minimize_energy,
    quadratic_form,
)

MOMENT_RATIO_WEIGHTS = (12.5, 25.0, 50.0, 100.0, 200.0, 400.0)
TWO_POINT_WEIGHTS = tuple(w * 1e4 for w in (1.25, 2.5, 5.0, 10.0, 20.0, 50.0))


@dataclass
class TargetMoment:
    """One penalised observable with its target value, statistical error and weight."""

    obs: ObservableSpec
    target: float
    sigma: float = 0.0
    weight: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.weight) and self.weight >= 0):
            raise ValueError("weight must be finite and non-negative")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        self.target = float(np.real(self.target))


@dataclass
class LossSpec:
    """Hamiltonian model, penalised targets and the ansatz template."""

    model: object
    targets: List[TargetMoment]
    template: CoreTemplate

    def __post_init__(self):
        if self.template.N != self.model.N:
            raise ValueError("template and Hamiltonian disagree on the number of sites")
        for t in self.targets:
            for s in t.obs.sites():
                if s >= self.template.N:
                    raise ValueError(f"target {t.obs.name()} outside the lattice")

    def with_targets(self, targets: Sequence[TargetMoment]) -> "LossSpec":
        return LossSpec(self.model, list(targets), self.template)


@dataclass
class OptResult:
    params: AnsatzParams
    loss: float
    energy: float
    residuals: np.ndarray
    delta_E: float = float("nan")
    converged: bool = True
    restarts_used: int = 1
    moments: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_text(self, spec: Optional[LossSpec] = None) -> str:
        from .ansatz import dumps_params

        lines = [dumps_params(self.params).rstrip("\n")]
        lines.append(f"loss {self.loss!r}")
        lines.append(f"energy {self.energy!r}")
        lines.append(f"delta_E {self.delta_E!r}")
        lines.append(f"converged {int(self.converged)}")
        lines.append(f"restarts_used {self.restarts_used}")
        names = [t.obs.name() for t in spec.targets] if spec else [""] * len(self.residuals)
        for name, res in zip(names, self.residuals):
            lines.append(f"residual {name or '-'} {float(res)!r}")
        return "\n".join(lines) + "\n"


class _Evaluator:
    """Precomputed quadratic forms so a loss evaluation is a few small matvecs."""

    def __init__(self, spec: LossSpec):
        t = spec.template
        self.gram = gram_matrix(t)
        self.h_terms = [
            (coef, obs.scaling, np.real(quadratic_form(t, obs))) for coef, obs in spec.model.terms()
        ]
        self.t_terms = [(obs_t.obs.scaling, np.real(quadratic_form(t, obs_t.obs))) for obs_t in spec.targets]
        self.targets = np.array([tm.target for tm in spec.targets])
        self.weights = np.array([tm.weight for tm in spec.targets])

    def parts(self, x):
        r = x[0]
        c = np.asarray(x[1:])
        den = c @ self.gram @ c
        if not den > 0:
            return np.inf, np.zeros(len(self.t_terms))
        e = sum(coef * math.exp(k * r) * (c @ m @ c) for coef, k, m in self.h_terms) / den
        mom = np.array([math.exp(k * r) * (c @ m @ c) / den for k, m in self.t_terms])
        return float(e), mom

    def __call__(self, x):
        e, mom = self.parts(x)
        if not np.isfinite(e):
            return 1e300
        return e + float(np.sum(self.weights * (mom - self.targets) ** 2))


def loss(params: AnsatzParams, spec: LossSpec) -> float:
    """``<H> + sum w (<O> - target)^2`` at ``params``."""
    return _Evaluator(spec)(params.to_vector())


def _normalise(x: np.ndarray, gram: np.ndarray) -> np.ndarray:
    c = x[1:]
    nrm = math.sqrt(max(float(c @ gram @ c), 1e-300))
    sign = -1.0 if c[0] < 0 else 1.0
    return np.concatenate([[x[0]], sign * c / nrm])


def _local_search(fun, x0, gram, xatol=1e-8, fatol=1e-10, maxiter=None):
    n = len(x0)
    maxiter = maxiter or 4000 * n
    res = so.minimize(
        fun,
        x0,
        method="Nelder-Mead",
        options={"xatol": xatol, "fatol": fatol, "maxiter": maxiter, "maxfev": maxiter, "adaptive": n > 4},
    )
    best = res
    # restart the simplex from its own optimum until it stops moving
    for _ in range(6):
        x = _normalise(best.x, gram)
        nxt = so.minimize(
            fun,
            x,
            method="Nelder-Mead",
            options={"xatol": xatol, "fatol": fatol, "maxiter": maxiter, "maxfev": maxiter, "adaptive": n > 4},
        )
        moved = np.max(np.abs(_normalise(nxt.x, gram) - x))
        improved = best.fun - nxt.fun
        if nxt.fun < best.fun:
            best = nxt
        if improved < fatol and moved < 10 * xatol:
            break
    polish = so.minimize(fun, _normalise(best.x, gram), method="BFGS", options={"gtol": 1e-10})
    if polish.fun < best.fun:
        best = polish
    converged = bool(best.success or polish.success)
    return _normalise(best.x, gram), float(best.fun), converged


def minimize(
    spec: LossSpec,
    init: str | AnsatzParams = "multistart",
    restarts: int = 16,
    rng: Optional[np.random.Generator] = None,
    e0: Optional[float] = None,
    e1: Optional[float] = None,
    perturbation: float = 1e-2,
) -> OptResult:
    """Minimise the loss.

    ``init`` is ``"gaussian"`` (start from the minimum-energy ansatz),
    ``"multistart"`` (that start plus ``restarts - 1`` perturbed copies) or
    an explicit :class:`AnsatzParams`.  Each start runs a restarted simplex
    followed by a quasi-Newton polish.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    ev = _Evaluator(spec)
    gram = ev.gram
    if isinstance(init, AnsatzParams):
        starts = [init.to_vector()]
    else:
        base, _ = minimize_energy(spec.template, spec.model)
        starts = [base.to_vector()]
        if init == "multistart":
            for _ in range(max(restarts - 1, 0)):
                x = base.to_vector().copy()
                x[0] += rng.normal(scale=0.1)
                x[1:] += rng.normal(scale=max(perturbation, 1e-12), size=x.size - 1) * (1 + np.abs(x[1:]))
                starts.append(x)
        elif init != "gaussian":
            raise ValueError(f"unknown init {init!r}")
    best = None
    all_conv = True
    for x0 in starts:
        x, f, conv = _local_search(ev, _normalise(np.asarray(x0, float), gram), gram)
        all_conv &= conv
        if best is None or f < best[1]:
            best = (x, f, conv)
    x, f, conv = best
    params = AnsatzParams.from_vector(spec.template, x)
    e, mom = ev.parts(x)
    res = mom - ev.targets
    de = delta_E(e, e0, e1) if e0 is not None and e1 is not None else float("nan")
    return OptResult(params, f, e, res, de, conv, len(starts), mom)


def evaluate(params: AnsatzParams, spec: LossSpec, e0=None, e1=None) -> OptResult:
    """Package the loss breakdown at fixed parameters."""
    ev = _Evaluator(spec)
    x = params.to_vector()
    e, mom = ev.parts(x)
    de = delta_E(e, e0, e1) if e0 is not None and e1 is not None else float("nan")
    return OptResult(params, ev(x), e, mom - ev.targets, de, True, 0, mom)


def delta_E(energy: float, e0: float, e1: float) -> float:
    """Energy excess in units of the gap."""
    if e1 <= e0:
        raise ValueError("e1 must exceed e0")
    return (energy - e0) / (e1 - e0)


# ---------------------------------------------------------------------------
# Target builders
# ---------------------------------------------------------------------------


def column_observables(q: int, p_max_total: int = 8) -> List[ObservableSpec]:
    """``phi^p pi^q`` with even ``p``, ``p + q <= p_max_total``, excluding the identity."""
    if q % 2:
        raise ValueError("only even q columns are symmetric-sector observables")
    return [
        ObservableSpec.phi_pi(p, q)
        for p in range(0, p_max_total - q + 1, 2)
        if not (p == 0 and q == 0)
    ]


def exact_moment(ground: np.ndarray, lam: int, obs: ObservableSpec) -> float:
    """``<Omega|phi^p pi^q|Omega>`` for a single-mode ground vector on cutoff ``lam``."""
    from .ansatz import _local_matrices

    phi, pi = _local_matrices(lam + 1)
    vec = np.asarray(ground, dtype=complex)
    out = vec.copy()
    for _, p, q in reversed(obs.factors):
        for _ in range(q):
            out = pi @ out
        for _ in range(p):
            out = phi @ out
    return float(np.real(np.vdot(vec, out)))


def column_targets(q_column: int, ground: np.ndarray, lam: int, p_max_total: int = 8) -> List[TargetMoment]:
    """Column target set with weights ``1/target^2`` from an exact ground vector."""
    out = []
    for obs in column_observables(q_column, p_max_total):
        val = exact_moment(ground, lam, obs)
        out.append(TargetMoment(obs, val, 0.0, 1.0 / val**2))
    return out


def column_mean_error(params: AnsatzParams, targets: Sequence[TargetMoment]) -> float:
    """Mean relative deviation ``|<O>/target - 1|`` over a column."""
    from .ansatz import expectation_real

    return float(np.mean([abs(expectation_real(params, t.obs) / t.target - 1.0) for t in targets]))


def preset_multimode_targets(kind: str, pimc_table: Dict[str, tuple], weight: float) -> List[TargetMoment]:
    """Target sets used for the lattice.

    ``pimc_table`` maps observable names (``phi6``, ``phi8``, ``phi10``,
    ``phi0phi4``) to ``(mean, stderr)``.
    """
    if not pimc_table:
        raise ValueError("empty Monte Carlo table")
    if kind == "moment_ratio":
        names = {"phi6": ObservableSpec.phi(6), "phi8": ObservableSpec.phi(8), "phi10": ObservableSpec.phi(10)}
    elif kind == "two_point":
        names = {"phi0phi4": ObservableSpec.two_point(4)}
    else:
        raise ValueError(f"unknown preset {kind!r}")
    out = []
    for key, obs in names.items():
        if key not in pimc_table:
            raise KeyError(f"Monte Carlo table lacks {key}")
        mean, err = pimc_table[key]
        out.append(TargetMoment(obs, mean, err, weight))
    return out


def preset_weights(kind: str):
    return {"moment_ratio": MOMENT_RATIO_WEIGHTS, "two_point": TWO_POINT_WEIGHTS}[kind]


# ---------------------------------------------------------------------------
# Uncertainty propagation
# ---------------------------------------------------------------------------


@dataclass
class Propagation:
    central: OptResult
    params: np.ndarray  # (n_ok, n_params)
    energies: np.ndarray
    moments: np.ndarray  # (n_ok, n_targets)
    sq_discrepancy: np.ndarray
    failures: int

    @property
    def param_mean(self):
        return self.params.mean(axis=0)

    @property
    def param_std(self):
        return self.params.std(axis=0, ddof=1) if len(self.params) > 1 else np.zeros(self.params.shape[1])


def propagate_uncertainty(
    spec: LossSpec,
    n_resamples: int = 100,
    rng: Optional[np.random.Generator] = None,
    central: Optional[OptResult] = None,
) -> Propagation:
    """Redraw every target from ``Normal(target, sigma)`` and re-minimise.

    Each resample starts from the central optimum so it follows the same basin.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    if central is None:
        central = minimize(spec, init="gaussian")
    ev0 = _Evaluator(spec)
    x0 = central.params.to_vector()
    ps, es, ms, sq = [], [], [], []
    failures = 0
    for _ in range(n_resamples):
        draws = [
            TargetMoment(t.obs, rng.normal(t.target, t.sigma) if t.sigma > 0 else t.target, t.sigma, t.weight)
            for t in spec.targets
        ]
        ev = _Evaluator(spec.with_targets(draws))
        try:
            x, _, conv = _local_search(ev, x0, ev.gram)
        except (FloatingPointError, ValueError):
            failures += 1
            continue
        if not conv:
            failures += 1
        e, mom = ev0.parts(x)
        ps.append(x)
        es.append(e)
        ms.append(mom)
        sq.append(float(np.sum((mom - ev0.targets) ** 2)))
    if failures:
        warnings.warn(f"{failures} resample optimisations did not report convergence")
    return Propagation(central, np.array(ps), np.array(es), np.array(ms), np.array(sq), failures)


# ---------------------------------------------------------------------------
# Closed-form squeezed-oscillator example
# ---------------------------------------------------------------------------


def analytic_squeezed_oracle(r: float, c0: float, c2: float):
    """Energy and ground-state fidelity of ``c0|0> + c2|2>`` for ``H = S n S^dag``.

    The core is normalised before evaluation.
    """
    nrm = math.hypot(c0, c2)
    if nrm == 0:
        raise ValueError("zero core")
    c0, c2 = c0 / nrm, c2 / nrm
    e = 2 * c2**2 * math.cosh(2 * r) - math.sqrt(2) * c0 * c2 * math.sinh(2 * r) + math.sinh(r) ** 2
    f = (c0 + c2 / math.sqrt(2) * math.tanh(r)) ** 2 / math.cosh(r)
    return e, f


def squeezed_oracle_optima(r: float, n_grid: int = 20001):
    """Grid search on the unit circle ``(c0, c2) = (cos t, sin t)``.

    Returns ``((c0, c2) at minimum energy, (c0, c2) at maximum fidelity,
    energy and fidelity at both points)``.
    """
    t = np.linspace(-np.pi / 2, np.pi / 2, n_grid)
    c0, c2 = np.cos(t), np.sin(t)
    e = 2 * c2**2 * np.cosh(2 * r) - np.sqrt(2) * c0 * c2 * np.sinh(2 * r) + np.sinh(r) ** 2
    f = (c0 + c2 / np.sqrt(2) * np.tanh(r)) ** 2 / np.cosh(r)
    i, k = int(np.argmin(e)), int(np.argmax(f))
    return {
        "min_energy": (float(c0[i]), float(c2[i])),
        "max_fidelity": (float(c0[k]), float(c2[k])),
        "energy_at_min_energy": float(e[i]),
        "fidelity_at_min_energy": float(f[i]),
        "energy_at_max_fidelity": float(e[k]),
        "fidelity_at_max_fidelity": float(f[k]),
    }
