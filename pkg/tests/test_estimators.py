import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from stellarprep import ansatz, fock, momentopt
from stellarprep.estimators import ContinuumExtrapolator, MomentOptimizer, parse_observable


def test_parse_observable():
    assert parse_observable("phi6") == ansatz.ObservableSpec.phi(6)
    assert parse_observable("pi2") == ansatz.ObservableSpec.pi(2)
    assert parse_observable("phi4pi2") == ansatz.ObservableSpec.phi_pi(4, 2)
    assert parse_observable("phi0phi3") == ansatz.ObservableSpec.two_point(3)
    with pytest.raises(ValueError):
        parse_observable("psi2")


def test_moment_optimizer_fits_oscillator():
    m = ansatz.OscillatorModel(1.0, 5.0)
    spec = fock.exact_ground(m.hamiltonian(150))
    names = ["phi2", "phi4", "phi6"]
    y = [momentopt.exact_moment(spec.ground, 150, parse_observable(n)) for n in names]
    est = MomentOptimizer(R=4, N=1, lambda_coupling=5.0, weight=1e3, random_state=0).fit(names, y)
    pred = est.predict(names)
    assert np.allclose(pred, y, rtol=5e-3)
    assert est.energy_ > spec.e0
    assert clone(est).get_params()["R"] == 4


def test_moment_optimizer_requires_fit():
    with pytest.raises(NotFittedError):
        MomentOptimizer(N=1).predict(["phi2"])


def test_moment_optimizer_checks_lengths():
    with pytest.raises(ValueError):
        MomentOptimizer(N=1).fit(["phi2"], [0.1, 0.2])


def test_continuum_extrapolator():
    th = np.array([[0.4], [0.2], [0.1]])
    y = 2.0 + 0.5 * th[:, 0] ** 2
    est = ContinuumExtrapolator().fit(th, y, sample_weight=[0.01, 0.01, 0.01])
    assert est.model_ == "quadratic"
    assert est.intercept_ == pytest.approx(2.0)
    assert np.allclose(est.predict(th), y)
    with pytest.raises(ValueError):
        ContinuumExtrapolator().fit(np.ones((3, 2)), y)
