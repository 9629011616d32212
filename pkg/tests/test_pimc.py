import warnings

import numpy as np
import pytest

from stellarprep import pimc
from stellarprep.pimc import EstimateWithError, LatticeShape


def test_shape_from_T():
    sh = LatticeShape.from_T(4, 10.0, 0.2)
    assert sh.n_timeslices == 50 and sh.T == pytest.approx(10.0)
    with pytest.raises(ValueError):
        LatticeShape.from_T(4, 10.0, 0.3)


def test_free_action_is_gaussian_quadratic_form():
    sh = LatticeShape(3, 5, 0.4)
    K = np.linalg.inv(pimc.gaussian_covariance(sh, 0.7))
    x = np.random.default_rng(0).normal(size=(3, 5))
    assert pimc.action(x, 0.7, 0.0, 0.4) == pytest.approx(0.5 * x.ravel() @ K @ x.ravel())


def test_small_steps_are_always_accepted():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(3, 6))
    _, acc = pimc.metropolis_sweep(x, 1e-9, rng, 0.6, 1.5, 0.2)
    assert acc == pytest.approx(1.0)
    with pytest.raises(ValueError):
        pimc.metropolis_sweep(x, 0.0, rng, 0.6, 1.5, 0.2)


def test_sampler_reproduces_gaussian_covariance():
    sh = LatticeShape(1, 8, 0.5)
    C = pimc.gaussian_covariance(sh, 1.0)
    ens = pimc.sample_chain(sh, 1.0, 0.0, 4000, seed=11)
    assert ens.iac <= 1.6
    for d in range(3):
        exact = np.mean([C[t, (t + d) % 8] for t in range(8)])
        est = pimc.bootstrap_estimate(ens, lambda phi, d=d: float(np.mean(phi * np.roll(phi, -d, axis=1))))
        assert abs(est.mean - exact) < 4 * est.stderr


def test_chain_is_reproducible():
    sh = LatticeShape(2, 4, 0.5)
    a = pimc.sample_chain(sh, 1.0, 0.5, 300, burn_in=200, seed=5)
    b = pimc.sample_chain(sh, 1.0, 0.5, 300, burn_in=200, seed=5)
    assert np.array_equal(a.configs, b.configs)


def test_autocorrelation_of_independent_draws():
    x = np.random.default_rng(2).normal(size=20000)
    assert pimc.integrated_autocorrelation(x) == pytest.approx(1.5, abs=0.2)
    assert pimc.windowed_iac(x) == pytest.approx(1.5, abs=0.05)
    with pytest.raises(ValueError):
        pimc.autocorrelation(x[:150])


def test_windowed_iac_of_ar1():
    rng = np.random.default_rng(3)
    rho = 0.5
    x = np.empty(50000)
    x[0] = 0.0
    for i in range(1, x.size):
        x[i] = rho * x[i - 1] + rng.normal()
    # 1 + sum_{d>=1} rho^d + 1/2 in the convention used here
    assert pimc.windowed_iac(x) == pytest.approx(1.5 + rho / (1 - rho), abs=0.1)


def test_bootstrap_is_seeded_and_combines():
    x = np.random.default_rng(4).normal(1.0, 1.0, 500)
    a = pimc.bootstrap_values(x, 200, seed=9)
    b = pimc.bootstrap_values(x, 200, seed=9)
    assert np.array_equal(a.bootstrap_means, b.bootstrap_means)
    assert a.stderr == pytest.approx(1 / np.sqrt(500), rel=0.2)
    d = pimc.combine(lambda u, v: u - v, a, b)
    assert d.mean == 0.0 and d.stderr == 0.0
    with pytest.raises(ValueError):
        pimc.bootstrap_values(x, 50)


def test_block_means():
    x = np.arange(25.0)
    assert np.array_equal(pimc.block_means(x, 10), [9.5, 19.5])  # leading remainder 0..4 dropped
    assert np.array_equal(pimc.block_means(x, 1), x)


def test_extrapolation_of_exact_data():
    th = [0.4, 0.2, 0.1]
    lin = pimc.extrapolate_theta([(t, EstimateWithError(1.0 + 2 * t, 0.01)) for t in th])
    assert lin.intercept.mean == pytest.approx(1.0) and lin.chi2_red_linear == pytest.approx(0.0, abs=1e-20)
    quad = pimc.extrapolate_theta([(t, EstimateWithError(1.0 + 2 * t * t, 0.01)) for t in th])
    assert quad.model == "quadratic" and quad.intercept.mean == pytest.approx(1.0)
    with pytest.raises(ValueError):
        pimc.extrapolate_theta([(0.1, EstimateWithError(1.0, 0.1))] * 2)


def test_effective_mass_of_exact_cosh():
    T, th, m = 10.0, 0.1, 0.8
    t = np.arange(0, 51) * th
    corr = [EstimateWithError(float(np.cosh(m * (T / 2 - s))), 1e-6) for s in t]
    meff = pimc.effective_mass(corr, T, th)
    assert all(e.mean == pytest.approx(m, rel=1e-8) for e in meff[:45])
    assert pimc.plateau(meff, pimc.default_window(T, th)).mean == pytest.approx(m, rel=1e-8)


def test_time_correlator_values_symmetric():
    x = np.random.default_rng(5).normal(size=(3, 2, 8))
    c = pimc.time_correlator_values(x)
    direct = np.mean([x[:, :, (s + 1) % 8] * x[:, :, s] for s in range(8)], axis=0).mean(axis=1)
    direct_back = np.mean([x[:, :, (s - 1) % 8] * x[:, :, s] for s in range(8)], axis=0).mean(axis=1)
    assert np.allclose(c[:, 1], 0.5 * (direct + direct_back))


def test_free_references():
    assert pimc.free_two_point(1.0, 1, 0) == pytest.approx(0.5)
    assert pimc.free_pi2(1.0, 1) == pytest.approx(0.5)


def test_virial_matches_free_chain():
    N, m_sq = 6, 1.0
    phi2 = EstimateWithError(pimc.free_two_point(m_sq, N, 0), 0.0, np.zeros(2) + pimc.free_two_point(m_sq, N, 0))
    phi01 = EstimateWithError(pimc.free_two_point(m_sq, N, 1), 0.0, np.zeros(2) + pimc.free_two_point(m_sq, N, 1))
    phi4 = EstimateWithError(0.0, 0.0, np.zeros(2))
    assert pimc.virial_pi2(phi2, phi4, m_sq, 0.0, phi01).mean == pytest.approx(pimc.free_pi2(m_sq, N))


def test_ensemble_file_roundtrip(tmp_path):
    sh = LatticeShape(2, 4, 0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ens = pimc.sample_chain(sh, 1.0, 0.5, 250, burn_in=100, seed=3)
    path = tmp_path / "ens.bin"
    pimc.save_ensemble(ens, path)
    back = pimc.load_ensemble(path)
    assert np.array_equal(back.configs, ens.configs)
    assert back.shape == sh and back.seed == 3
