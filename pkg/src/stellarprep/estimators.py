"""scikit-learn style wrappers around the optimiser and the continuum fit."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_random_state

from . import momentopt
from .ansatz import LatticeModel, ObservableSpec, OscillatorModel, enumerate_core_template, expectation_real
from .pimc import EstimateWithError, extrapolate_theta


def _as_observables(X) -> list:
    out = []
    for item in X:
        if isinstance(item, ObservableSpec):
            out.append(item)
        elif isinstance(item, str):
            out.append(parse_observable(item))
        else:
            raise TypeError(f"cannot interpret {item!r} as an observable")
    return out


def parse_observable(name: str) -> ObservableSpec:
    """``phi6``, ``pi2``, ``phi4pi2`` or ``phi0phi3`` (two-point, separation 3)."""
    import re

    m = re.fullmatch(r"phi0phi(\d+)", name)
    if m:
        return ObservableSpec.two_point(int(m.group(1)))
    m = re.fullmatch(r"(?:phi(\d+))?(?:pi(\d+))?", name)
    if not m or not name:
        raise ValueError(f"unknown observable {name!r}")
    p = int(m.group(1) or 0)
    q = int(m.group(2) or 0)
    return ObservableSpec.phi_pi(p, q)


class MomentOptimizer(BaseEstimator, RegressorMixin):
    """Fit ansatz parameters to target moments.

    ``fit(X, y, sample_weight)`` takes observables ``X`` (names or
    :class:`ObservableSpec`), targets ``y`` and optional per-target weights
    (default ``weight``).  ``predict(X)`` returns the fitted expectation values.
    ``N=1`` selects the single-mode oscillator with ``sigma`` and
    ``lambda_coupling``; larger ``N`` selects the lattice with ``m_sq``.
    """

    def __init__(
        self,
        R: int = 4,
        Q: int = 2,
        N: int = 10,
        m_sq: float = 0.6,
        lambda_coupling: float = 1.5,
        sigma: float = 1.0,
        weight: float = 1.0,
        init: str = "gaussian",
        restarts: int = 8,
        random_state=None,
    ):
        self.R = R
        self.Q = Q
        self.N = N
        self.m_sq = m_sq
        self.lambda_coupling = lambda_coupling
        self.sigma = sigma
        self.weight = weight
        self.init = init
        self.restarts = restarts
        self.random_state = random_state

    def _model(self):
        if self.N == 1:
            return OscillatorModel(self.sigma, self.lambda_coupling)
        return LatticeModel(self.m_sq, self.lambda_coupling, self.N)

    def fit(self, X, y, sample_weight: Optional[Sequence[float]] = None):
        obs = _as_observables(X)
        y = check_array(np.asarray(y, dtype=float).reshape(-1, 1), ensure_min_samples=0).ravel()
        if len(obs) != y.size:
            raise ValueError("X and y have different lengths")
        w = np.full(y.size, float(self.weight)) if sample_weight is None else np.asarray(sample_weight, float)
        if w.shape != y.shape:
            raise ValueError("sample_weight must match y")
        template = enumerate_core_template(self.R, 0 if self.N == 1 else self.Q, self.N)
        targets = [momentopt.TargetMoment(o, t, 0.0, wi) for o, t, wi in zip(obs, y, w)]
        spec = momentopt.LossSpec(self._model(), targets, template)
        rng = np.random.default_rng(check_random_state(self.random_state).randint(2**31))
        self.result_ = momentopt.minimize(spec, init=self.init, restarts=self.restarts, rng=rng)
        self.params_ = self.result_.params
        self.energy_ = self.result_.energy
        self.spec_ = spec
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        return np.array([expectation_real(self.params_, o) for o in _as_observables(X)])


class ContinuumExtrapolator(BaseEstimator, RegressorMixin):
    """Zero-spacing fit of estimates measured at several ``theta``.

    ``fit(X, y, sample_weight)``: ``X`` is the column of spacings, ``y`` the
    means and ``sample_weight`` the standard errors (a naming forced by the
    estimator protocol).  After fitting, ``intercept_`` holds the continuum
    value and ``model_`` the chosen fit form.
    """

    def __init__(self, random_state=0):
        self.random_state = random_state

    def fit(self, X, y, sample_weight=None):
        X = check_array(X, ensure_min_samples=3)
        if X.shape[1] != 1:
            raise ValueError("X must be a single column of theta values")
        y = np.asarray(y, dtype=float).ravel()
        s = np.ones_like(y) if sample_weight is None else np.asarray(sample_weight, dtype=float).ravel()
        pts = [(float(t), EstimateWithError(float(m), float(e))) for t, m, e in zip(X[:, 0], y, s)]
        fit = extrapolate_theta(pts, seed=self.random_state)
        self.fit_ = fit
        self.intercept_ = fit.intercept.mean
        self.intercept_stderr_ = fit.intercept.stderr
        self.slope_ = fit.slope
        self.model_ = fit.model
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "fit_")
        X = check_array(X)
        x = X[:, 0] if self.model_ == "linear" else X[:, 0] ** 2
        return self.intercept_ + self.slope_ * x
