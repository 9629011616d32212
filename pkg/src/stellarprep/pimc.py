"""Euclidean path-integral Monte Carlo for the lattice phi^4 chain.

Configurations ``phi[j, t]`` live on an ``N x M`` periodic lattice with
temporal spacing ``theta``; the weight is ``exp(-S)`` with

    S = sum_{t,j} theta/2 [m^2 phi^2 + lambda/2 phi^4
                           + (phi_{j,t+1} - phi_{j,t})^2 / theta^2
                           + (phi_{j+1,t} - phi_{j,t})^2].

Updates are site-by-site Gaussian Metropolis steps, optionally followed by
overrelaxation sweeps that reflect each site through the centre of its local
Gaussian weight and accept with the quartic factor.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numba
import numpy as np
import scipy.optimize as so
import scipy.stats as ss

DEFAULT_IAC_TARGET = 1.6
DEFAULT_BOOTSTRAP = 200
MAX_LAG = 100
# consecutive thinned samples resampled together by the ensemble estimators
BLOCK = 10
TIE_TOLERANCE = 0.05


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeShape:
    n_sites: int
    n_timeslices: int
    theta: float

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("need at least one site")
        if self.n_timeslices < 2:
            raise ValueError("need at least two time slices")
        if not self.theta > 0:
            raise ValueError("theta must be positive")

    @property
    def T(self) -> float:
        return self.n_timeslices * self.theta

    @classmethod
    def from_T(cls, n_sites: int, T: float, theta: float) -> "LatticeShape":
        M = round(T / theta)
        if abs(M * theta - T) > 1e-9 * max(1.0, T):
            raise ValueError(f"T={T} is not a multiple of theta={theta}")
        return cls(n_sites, M, theta)


@dataclass
class FieldConfig:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("field must be an N x M array")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field has non-finite entries")


@dataclass
class LatticeEnsemble:
    """Thinned samples, stored as an ``(n_samples, N, M)`` array."""

    configs: np.ndarray
    shape: LatticeShape
    m_sq: float
    lambda_coupling: float
    seed: int
    iac: float = float("nan")
    acceptance: float = float("nan")
    thinning: int = 1
    autocorrelation: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return len(self.configs)

    def __getitem__(self, i) -> FieldConfig:
        return FieldConfig(self.configs[i])


@dataclass
class EstimateWithError:
    mean: float
    stderr: float
    bootstrap_means: np.ndarray = field(default_factory=lambda: np.zeros(0))
    usable: bool = True

    def __post_init__(self):
        self.bootstrap_means = np.asarray(self.bootstrap_means, dtype=float)

    @classmethod
    def from_bootstrap(cls, bootstrap_means, mean=None) -> "EstimateWithError":
        b = np.asarray(bootstrap_means, dtype=float)
        m = float(np.mean(b)) if mean is None else float(mean)
        return cls(m, float(np.std(b, ddof=1)) if b.size > 1 else 0.0, b)


@dataclass
class FitResult:
    intercept: EstimateWithError
    model: str
    chi2_red: float
    chi2_red_linear: float
    chi2_red_quadratic: float
    slope: float


# ---------------------------------------------------------------------------
# Action and sampler
# ---------------------------------------------------------------------------


def _values(config) -> np.ndarray:
    return config.values if isinstance(config, FieldConfig) else np.asarray(config, dtype=float)


def action(config, m_sq: float, lambda_coupling: float, theta: float) -> float:
    """Lattice action of one configuration (both directions periodic)."""
    phi = _values(config)
    dt = np.roll(phi, -1, axis=1) - phi
    dx = np.roll(phi, -1, axis=0) - phi
    dens = m_sq * phi**2 + 0.5 * lambda_coupling * phi**4 + dt**2 / theta**2 + dx**2
    return float(0.5 * theta * dens.sum())


@numba.njit(cache=True)
def _sweeps(phi, n_sweeps, step, theta, m_sq, lam, n_overrelax, rng):
    N, M = phi.shape
    a2 = theta * m_sq / 2 + 1.0 / theta + (theta if N > 1 else 0.0)
    a4 = theta * lam / 4
    acc = 0
    for _ in range(n_sweeps):
        for t in range(M):
            tp = (t + 1) % M
            tm = (t - 1) % M
            for j in range(N):
                x = phi[j, t]
                b = (phi[j, tp] + phi[j, tm]) / theta
                if N > 1:
                    b += theta * (phi[(j + 1) % N, t] + phi[(j - 1) % N, t])
                y = x + step * rng.standard_normal()
                dS = a2 * (y * y - x * x) + a4 * (y**4 - x**4) - b * (y - x)
                if dS <= 0.0 or rng.random() < math.exp(-dS):
                    phi[j, t] = y
                    acc += 1
        for _k in range(n_overrelax):
            for t in range(M):
                tp = (t + 1) % M
                tm = (t - 1) % M
                for j in range(N):
                    x = phi[j, t]
                    b = (phi[j, tp] + phi[j, tm]) / theta
                    if N > 1:
                        b += theta * (phi[(j + 1) % N, t] + phi[(j - 1) % N, t])
                    y = b / a2 - x
                    dS = a4 * (y**4 - x**4)
                    if dS <= 0.0 or rng.random() < math.exp(-dS):
                        phi[j, t] = y
    return acc / (n_sweeps * N * M)


def metropolis_sweep(
    config,
    step_width: float,
    rng: np.random.Generator,
    m_sq: float,
    lambda_coupling: float,
    theta: float,
    n_overrelax: int = 0,
) -> Tuple[FieldConfig, float]:
    """One Metropolis pass over every site (plus ``n_overrelax`` reflection passes)."""
    if not step_width > 0:
        raise ValueError("step_width must be positive")
    phi = np.array(_values(config), dtype=float, copy=True)
    acc = _sweeps(phi, 1, float(step_width), float(theta), float(m_sq), float(lambda_coupling), int(n_overrelax), rng)
    return FieldConfig(phi), float(acc)


def _tune(phi, rng, step, shape, m_sq, lam, n_overrelax, burn_in):
    done = 0
    acc = 0.5
    while done < burn_in:
        n = min(25, burn_in - done)
        acc = _sweeps(phi, n, step, shape.theta, m_sq, lam, n_overrelax, rng)
        step *= math.exp(acc - 0.5)
        done += n
    return step, acc


def _collect(phi, rng, step, shape, m_sq, lam, n_overrelax, n, thinning):
    out = np.empty((n,) + phi.shape)
    acc = 0.0
    for i in range(n):
        acc += _sweeps(phi, thinning, step, shape.theta, m_sq, lam, n_overrelax, rng)
        out[i] = phi
    return out, acc / n


def sample_chain(
    shape: LatticeShape,
    m_sq: float,
    lambda_coupling: float,
    n_samples: int,
    thinning: int = 1,
    burn_in: int = 1000,
    seed: int = 0,
    iac_target: float = DEFAULT_IAC_TARGET,
    max_thinning: int = 4096,
    n_overrelax: int = 2,
    step_width: float = 0.5,
) -> LatticeEnsemble:
    """Thinned Markov chain whose autocorrelation is at most ``iac_target``.

    The step width is tuned toward 50% acceptance during burn-in.  A pilot run
    picks the thinning; the production run is re-checked and repeated with a
    larger thinning if it is still too correlated.  The check uses the
    ``phi_{0,0}`` IAC together with the slice averages of ``phi^2`` and
    ``phi_j phi_{j+1}`` (see :func:`chain_iac`), because the quadratic
    observables decorrelate more slowly than the field itself.
    """
    if n_samples < 100:
        raise ValueError("need at least 100 samples")
    if thinning < 1:
        raise ValueError("thinning must be positive")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    phi = np.zeros((shape.n_sites, shape.n_timeslices))
    step, _ = _tune(phi, rng, float(step_width), shape, m_sq, lambda_coupling, n_overrelax, burn_in)

    n_pilot = max(min(n_samples, 1000), 2 * MAX_LAG + 1)
    while True:
        pilot, _ = _collect(phi, rng, step, shape, m_sq, lambda_coupling, n_overrelax, n_pilot, thinning)
        iac = chain_iac(pilot, windowed=True)
        if iac <= iac_target:
            break
        thinning = _next_thinning(thinning, iac, iac_target, max_thinning)

    while True:
        configs, acc = _collect(phi, rng, step, shape, m_sq, lambda_coupling, n_overrelax, n_samples, thinning)
        if n_samples <= 2 * MAX_LAG:
            iac = float("nan")
            ac = np.zeros(0)
            break
        ac = autocorrelation(configs[:, 0, 0])
        iac = max(0.5 + float(ac.sum()), chain_iac(configs, windowed=True))
        if iac <= iac_target:
            break
        thinning = _next_thinning(thinning, iac, iac_target, max_thinning)
    return LatticeEnsemble(configs, shape, m_sq, lambda_coupling, seed, iac, acc, thinning, ac)


def windowed_iac(series, c: float = 5.0, max_lag: int = MAX_LAG) -> float:
    """IAC of a centred series with a self-consistent summation window.

    Returned in the same convention as :func:`integrated_autocorrelation`
    (about 1.5 for independent draws).  The window stops at the first lag
    ``W >= c * tau(W)``, which keeps the noise of the tail out of the sum.
    """
    x = np.asarray(series, dtype=float)
    x = x - x.mean()
    n = x.size
    den = float(np.dot(x, x))
    if den == 0.0:
        return 1.5
    tau = 0.5
    for d in range(1, min(max_lag, n // 2) + 1):
        tau += float(np.dot(x[: n - d], x[d:])) / den * n / (n - d)
        if d >= c * tau:
            break
    return tau + 1.0


def chain_iac(configs: np.ndarray, windowed: bool = True) -> float:
    """Largest IAC among ``phi_{0,0}``, slice-mean ``phi^2`` and slice-mean ``phi_j phi_{j+1}``."""
    configs = np.asarray(configs, dtype=float)
    first = configs[:, :, 0]
    series = [configs[:, 0, 0], (first**2).mean(axis=1)]
    if configs.shape[1] > 1:
        series.append((first * np.roll(first, -1, axis=1)).mean(axis=1))
    else:
        series.append((first * configs[:, :, 1 % configs.shape[2]]).mean(axis=1))
    return max(windowed_iac(s) for s in series)


def _next_thinning(thinning, iac, target, cap):
    # an exponential autocorrelation with IAC = 1 + rho/(1-rho) shrinks as rho^k
    new = thinning * max(2, math.ceil((iac - 1.0) / max(target - 1.0, 1e-3)))
    if new > cap:
        raise RuntimeError(f"thinning cap {cap} exceeded (IAC {iac:.3f} at thinning {thinning})")
    return new


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


def autocorrelation(series, max_lag: int = MAX_LAG) -> np.ndarray:
    """``AC(d) = N/(N-d) sum_a x_a x_{a+d} / sum_a x_a^2`` for ``d = 0..max_lag``."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if n <= 2 * max_lag:
        raise ValueError(f"series of length {n} is too short (need > {2 * max_lag})")
    den = float(np.dot(x, x))
    if den == 0.0:
        raise ValueError("series is identically zero")
    return np.array([n / (n - d) * float(np.dot(x[: n - d], x[d:])) / den for d in range(max_lag + 1)])


def integrated_autocorrelation(series, max_lag: int = MAX_LAG) -> float:
    """``1/2 + sum_{d=0}^{max_lag} AC(d)``; equals about 1.5 for independent draws."""
    return 0.5 + float(autocorrelation(series, max_lag).sum())


def bootstrap_indices(n_samples: int, n_bootstrap: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, n_samples, size=(n_bootstrap, n_samples))


def _screen_normality(means: np.ndarray, label: str = ""):
    if means.size < 8 or np.std(means) == 0:
        return
    skew = float(ss.skew(means))
    kurt = float(ss.kurtosis(means))
    if abs(skew) > 0.5 or abs(kurt) > 1.0:
        warnings.warn(f"bootstrap means {label} look non-normal (skew {skew:.2f}, excess kurtosis {kurt:.2f})")


def block_means(values, block: int) -> np.ndarray:
    """Means of consecutive blocks of length ``block`` (a leading remainder is dropped)."""
    v = np.asarray(values, dtype=float)
    if block <= 1 or v.size < 2 * block:
        return v
    n = v.size // block
    return v[v.size - n * block:].reshape(n, block).mean(axis=1)


def bootstrap_values(values, n_bootstrap: int = DEFAULT_BOOTSTRAP, seed=0, block: int = 1) -> EstimateWithError:
    """Bootstrap a per-sample series; the same ``seed`` gives the same resamples.

    With ``block > 1`` whole blocks of consecutive samples are resampled,
    which keeps residual autocorrelation inside the error bar.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty ensemble")
    if n_bootstrap < 100:
        raise ValueError("use at least 100 bootstrap resamples")
    v = block_means(v, block)
    idx = bootstrap_indices(v.size, n_bootstrap, seed)
    means = v[idx].mean(axis=1)
    _screen_normality(means)
    return EstimateWithError(float(means.mean()), float(means.std(ddof=1)), means)


def _bootstrap_seed(ensemble: LatticeEnsemble, seed):
    return np.random.SeedSequence([ensemble.seed, 1]) if seed is None else seed


def bootstrap_estimate(
    ensemble: LatticeEnsemble,
    observable: Callable[[np.ndarray], float],
    n_bootstrap: int = DEFAULT_BOOTSTRAP,
    seed=None,
) -> EstimateWithError:
    """Bootstrap mean and error of ``observable(phi)`` over the ensemble.

    Without an explicit ``seed`` the resampling indices derive from the
    ensemble seed, so estimates from one ensemble are resampled jointly and can
    be combined resample by resample.
    """
    if len(ensemble) == 0:
        raise ValueError("empty ensemble")
    vals = np.array([observable(c) for c in ensemble.configs], dtype=float)
    return bootstrap_values(vals, n_bootstrap, _bootstrap_seed(ensemble, seed), BLOCK)


def combine(fn: Callable[..., float], *estimates: EstimateWithError) -> EstimateWithError:
    """Apply ``fn`` resample by resample; requires aligned bootstrap arrays."""
    n = {e.bootstrap_means.size for e in estimates}
    if len(n) != 1:
        raise ValueError("estimates carry different numbers of resamples")
    means = fn(*[e.bootstrap_means for e in estimates])
    central = fn(*[np.float64(e.mean) for e in estimates])
    b = np.asarray(means, dtype=float)
    return EstimateWithError(float(central), float(np.std(b, ddof=1)) if b.size > 1 else 0.0, b)


def stderr_stable(values, n_bootstrap: int = DEFAULT_BOOTSTRAP, seed=0, rel_tol: float = 0.05) -> bool:
    """True when doubling the resample count moves the error by less than ``rel_tol``."""
    a = bootstrap_values(values, n_bootstrap, seed).stderr
    b = bootstrap_values(values, 2 * n_bootstrap, seed).stderr
    return abs(b - a) <= rel_tol * max(a, 1e-300)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def two_point_values(configs: np.ndarray, j: int) -> np.ndarray:
    """Per-sample ``<phi_i phi_{i+j}>`` averaged over sites and time slices."""
    return (configs * np.roll(configs, -j, axis=1)).mean(axis=(1, 2))


def moment_values(configs: np.ndarray, power: int) -> np.ndarray:
    return (configs**power).mean(axis=(1, 2))


def two_point(ensemble: LatticeEnsemble, j: int, n_bootstrap: int = DEFAULT_BOOTSTRAP, seed=None):
    return bootstrap_values(two_point_values(ensemble.configs, j), n_bootstrap, _bootstrap_seed(ensemble, seed), BLOCK)


def local_moment(ensemble: LatticeEnsemble, power: int, n_bootstrap: int = DEFAULT_BOOTSTRAP, seed=None):
    if power < 1:
        raise ValueError("power must be positive")
    return bootstrap_values(moment_values(ensemble.configs, power), n_bootstrap, _bootstrap_seed(ensemble, seed), BLOCK)


def time_correlator_values(configs: np.ndarray) -> np.ndarray:
    """Per-sample symmetrised ``C(t) = <phi_{j,t} phi_{j,0}>`` for ``t = 0..M/2``."""
    M = configs.shape[2]
    f = np.fft.rfft(configs, axis=2)
    corr = np.fft.irfft(f * f.conj(), n=M, axis=2).mean(axis=1) / M
    sym = 0.5 * (corr + np.roll(corr[:, ::-1], 1, axis=1))
    return sym[:, : M // 2 + 1]


def time_correlator(ensemble: LatticeEnsemble, n_bootstrap: int = DEFAULT_BOOTSTRAP, seed=None):
    vals = time_correlator_values(ensemble.configs)
    s = _bootstrap_seed(ensemble, seed)
    return [bootstrap_values(vals[:, t], n_bootstrap, s, BLOCK) for t in range(vals.shape[1])]


def virial_pi2(
    phi2: EstimateWithError,
    phi4: EstimateWithError,
    m_sq: float,
    lambda_coupling: float,
    phi01: EstimateWithError,
) -> EstimateWithError:
    """``<pi^2> = <phi_j dV/dphi_j> = (2 + m^2)<phi^2> - 2<phi_0 phi_1> + lambda <phi^4>``."""
    return combine(lambda a, b, c: (2 + m_sq) * a - 2 * c + lambda_coupling * b, phi2, phi4, phi01)


def moment_ratio_estimate(phi2n: EstimateWithError, phi2: EstimateWithError, n: int) -> EstimateWithError:
    dfact = math.prod(range(2 * n - 1, 0, -2))
    return combine(lambda a, b: a / (dfact * b**n), phi2n, phi2)


def _log_cosh(x: float) -> float:
    x = abs(x)
    return x + math.log1p(math.exp(-2 * x)) - math.log(2)


def _solve_meff(ratio: float, a: float, b: float) -> float:
    """Root ``m`` of ``cosh(m a) / cosh(m b) = ratio`` with ``a > |b|``."""
    if not (ratio > 1.0 and math.isfinite(ratio)):
        return float("nan")
    target = math.log(ratio)

    def f(m):
        return _log_cosh(m * a) - _log_cosh(m * b) - target

    hi = 1.0
    while f(hi) < 0:
        hi *= 2
        if hi > 1e8:
            return float("nan")
    return so.brentq(f, 0.0, hi, xtol=1e-14, rtol=1e-14)


def effective_mass(correlator: Sequence[EstimateWithError], T: float, theta: float) -> List[EstimateWithError]:
    """Cosh-ratio effective mass at ``t = 0 .. len(correlator) - 2``.

    Points whose ratio admits no root (noise driving ``C(t) <= C(t+1)``) come
    back with ``usable=False`` and a NaN mean.
    """
    out = []
    for t in range(len(correlator) - 1):
        a = T / 2 - t * theta
        b = T / 2 - (t + 1) * theta
        if a <= abs(b) - 1e-12:
            break
        c0, c1 = correlator[t], correlator[t + 1]
        central = _solve_meff(c0.mean / c1.mean, a, b) if c1.mean != 0 else float("nan")
        boots = np.array(
            [_solve_meff(x / y, a, b) if y != 0 else float("nan") for x, y in zip(c0.bootstrap_means, c1.bootstrap_means)]
        )
        usable = math.isfinite(central) and (boots.size == 0 or np.mean(np.isfinite(boots)) > 0.9)
        good = boots[np.isfinite(boots)]
        err = float(np.std(good, ddof=1)) if good.size > 1 else 0.0
        out.append(EstimateWithError(central if usable else float("nan"), err, boots, usable))
    return out


def default_window(T: float, theta: float) -> Tuple[int, int]:
    """Middle third of ``[0, T/2]`` as time-slice indices ``[t_min, t_max]``."""
    half = T / 2
    return int(round(half / 3 / theta)), int(round(2 * half / 3 / theta))


def plateau(meff: Sequence[EstimateWithError], window: Tuple[int, int]) -> EstimateWithError:
    """Inverse-variance average of usable effective masses in ``window`` (inclusive)."""
    pts = [(t, e) for t, e in enumerate(meff) if window[0] <= t <= window[1] and e.usable]
    if not pts:
        raise ValueError("no usable effective-mass points in the window")
    w = np.array([1.0 / max(e.stderr, 1e-12) ** 2 for _, e in pts])
    w /= w.sum()
    central = float(sum(wi * e.mean for wi, (_, e) in zip(w, pts)))
    boots = None
    if all(e.bootstrap_means.size for _, e in pts):
        stack = np.array([e.bootstrap_means for _, e in pts])
        boots = np.nansum(stack * w[:, None], axis=0)
    if boots is None:
        err = float(math.sqrt(sum((wi * e.stderr) ** 2 for wi, (_, e) in zip(w, pts))))
        return EstimateWithError(central, err)
    return EstimateWithError(central, float(np.std(boots, ddof=1)), boots)


# ---------------------------------------------------------------------------
# Continuum extrapolation
# ---------------------------------------------------------------------------


def _wls(x, y, s):
    A = np.column_stack([np.ones_like(x), x])
    w = 1.0 / np.maximum(s, 1e-300)
    Aw = A * w[:, None]
    if np.linalg.matrix_rank(Aw) < 2:
        raise np.linalg.LinAlgError("singular design matrix")
    coef, *_ = np.linalg.lstsq(Aw, y * w, rcond=None)
    chi2 = float(np.sum(((A @ coef - y) * w) ** 2))
    return coef, chi2


def extrapolate_theta(points: Sequence[Tuple[float, EstimateWithError]], seed=0) -> FitResult:
    """Weighted fits ``a + b theta`` and ``a + b theta^2``; keep the lower reduced chi^2.

    A difference below 0.05 in reduced chi^2 goes to the quadratic model.  The
    intercept error comes from refitting each bootstrap resample (or normal
    draws when resamples are missing).
    """
    if len(points) < 3:
        raise ValueError("need at least three theta values")
    th = np.array([p[0] for p in points], dtype=float)
    if len(set(th.tolist())) < 2:
        raise np.linalg.LinAlgError("singular design matrix")
    y = np.array([p[1].mean for p in points])
    s = np.array([p[1].stderr for p in points])
    dof = len(points) - 2
    fits = {}
    for name, x in (("linear", th), ("quadratic", th**2)):
        coef, chi2 = _wls(x, y, s)
        fits[name] = (coef, chi2 / dof)
    lin, quad = fits["linear"][1], fits["quadratic"][1]
    model = "quadratic" if quad <= lin + TIE_TOLERANCE else "linear"
    x = th if model == "linear" else th**2
    coef = fits[model][0]

    sizes = {p[1].bootstrap_means.size for p in points}
    if 0 not in sizes:
        nb = min(sizes)
        ys = np.array([p[1].bootstrap_means[:nb] for p in points])
    else:
        rng = np.random.default_rng(seed)
        nb = DEFAULT_BOOTSTRAP
        ys = y[:, None] + s[:, None] * rng.standard_normal((len(points), nb))
    boots = np.array([_wls(x, ys[:, b], s)[0][0] for b in range(nb)])
    err = float(np.std(boots, ddof=1))
    return FitResult(EstimateWithError(float(coef[0]), err, boots), model, fits[model][1], lin, quad, float(coef[1]))


# ---------------------------------------------------------------------------
# Free-theory references
# ---------------------------------------------------------------------------


def free_frequencies(m_sq: float, N: int) -> np.ndarray:
    k = np.arange(N)
    return np.sqrt(m_sq + 4 * np.sin(np.pi * k / N) ** 2)


def free_two_point(m_sq: float, N: int, j: int) -> float:
    """Ground-state ``<phi_0 phi_j>`` of the free chain."""
    k = np.arange(N)
    return float(np.sum(np.cos(2 * np.pi * j * k / N) / free_frequencies(m_sq, N)) / (2 * N))


def free_pi2(m_sq: float, N: int) -> float:
    return float(np.sum(free_frequencies(m_sq, N)) / (2 * N))


def gaussian_covariance(shape: LatticeShape, m_sq: float) -> np.ndarray:
    """Exact covariance of the ``lambda = 0`` lattice weight (flattened ``j * M + t``)."""
    N, M, th = shape.n_sites, shape.n_timeslices, shape.theta
    K = np.zeros((N * M, N * M))

    def idx(j, t):
        return (j % N) * M + (t % M)

    for j in range(N):
        for t in range(M):
            i = idx(j, t)
            K[i, i] += th * m_sq
            for a, b, c in ((idx(j, t + 1), i, 1 / th), (idx(j + 1, t), i, th if N > 1 else 0.0)):
                K[a, a] += c
                K[b, b] += c
                K[a, b] -= c
                K[b, a] -= c
    return np.linalg.inv(K)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

_MAGIC = "stellarprep-ensemble"


def save_ensemble(ensemble: LatticeEnsemble, path) -> None:
    """One text header line, then the samples as little-endian float64."""
    sh = ensemble.shape
    header = (
        f"{_MAGIC} N={sh.n_sites} M={sh.n_timeslices} theta={sh.theta!r} seed={ensemble.seed} "
        f"thinning={ensemble.thinning} n_samples={len(ensemble)} m_sq={ensemble.m_sq!r} "
        f"lambda={ensemble.lambda_coupling!r} iac={ensemble.iac!r} acceptance={ensemble.acceptance!r}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(ensemble.configs, dtype="<f8").tobytes())


def load_ensemble(path) -> LatticeEnsemble:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if not header or header[0] != _MAGIC:
            raise ValueError(f"{path} is not an ensemble file")
        meta = dict(kv.split("=", 1) for kv in header[1:])
        N, M, n = int(meta["N"]), int(meta["M"]), int(meta["n_samples"])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * N * M:
        raise ValueError("ensemble file is truncated")
    shape = LatticeShape(N, M, float(meta["theta"]))
    return LatticeEnsemble(
        data.reshape(n, N, M).copy(),
        shape,
        float(meta["m_sq"]),
        float(meta["lambda"]),
        int(meta["seed"]),
        float(meta["iac"]),
        float(meta["acceptance"]),
        int(meta["thinning"]),
    )


def moment_rows(named: Sequence[Tuple[str, EstimateWithError]]) -> List[dict]:
    """CSV-ready rows ``observable, mean, stderr, n_bootstrap``."""
    return [
        {"observable": k, "mean": e.mean, "stderr": e.stderr, "n_bootstrap": int(e.bootstrap_means.size)}
        for k, e in named
    ]
