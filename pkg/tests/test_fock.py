import numpy as np
import pytest

from stellarprep import fock


def test_cutoff_index_roundtrip():
    cut = fock.FockCutoff(3, 3)
    for i in range(cut.dim):
        assert cut.index(cut.occupations(i)) == i
    assert cut.index((1, 0, 2)) == 1 * 16 + 0 * 4 + 2


def test_cutoff_rejects_bad_input():
    with pytest.raises(ValueError):
        fock.FockCutoff(-1)
    with pytest.raises(ValueError):
        fock.FockCutoff(2, 0)
    with pytest.raises(MemoryError):
        fock.FockCutoff(100, 10)


def test_commutator_away_from_cutoff():
    cut = fock.FockCutoff(12)
    a, ad = fock.ladder_ops(cut)
    comm = (a @ ad - ad @ a).dense()
    assert np.allclose(np.diag(comm)[:-1], 1.0)
    phi, pi = fock.quadratures(cut)
    c = (phi @ pi - pi @ phi).dense()
    assert np.allclose(np.diag(c)[:-1], 1j)


def test_harmonic_oscillator_spectrum():
    H = fock.hamiltonian_0p1(1.0, 0.0, fock.FockCutoff(30))
    spec = fock.exact_ground(H)
    assert spec.e0 == pytest.approx(0.5, abs=1e-12)
    assert spec.gap == pytest.approx(1.0, abs=1e-12)


def test_parity_sector_gap():
    H = fock.hamiltonian_0p1(1.0, 1.0, fock.FockCutoff(60))
    full = fock.exact_ground(H)
    even = fock.exact_ground(H, symmetry_sector="even")
    assert even.e0 == pytest.approx(full.e0, abs=1e-10)
    assert even.e1 > full.e1


@pytest.mark.slow
def test_free_lattice_matches_normal_modes():
    N, m_sq = 3, 1.0
    H = fock.hamiltonian_1p1(m_sq, 0.0, fock.FockCutoff(16, N))
    spec = fock.exact_ground(H)
    k = np.arange(N)
    omega = np.sqrt(m_sq + 4 * np.sin(np.pi * k / N) ** 2)
    assert spec.e0 == pytest.approx(omega.sum() / 2, abs=1e-8)


def test_lattice_commutes_with_symmetries():
    cut = fock.FockCutoff(3, 3)
    H = fock.hamiltonian_1p1(0.6, 1.5, cut).dense()
    for op in (fock.shift_operator(cut), fock.inversion_operator(cut), fock.parity_operator(cut)):
        P = op.dense()
        assert np.allclose(H @ P, P @ H)


def test_squeeze_matrix_is_orthogonal_and_composes():
    S1 = fock.squeeze_matrix(0.3, 20).dense()
    S2 = fock.squeeze_matrix(-0.3, 20).dense()
    assert np.allclose(S1 @ S1.conj().T, np.eye(21), atol=1e-12)
    assert np.allclose(S1 @ S2, np.eye(21), atol=1e-12)


def test_squeezed_vacuum_distribution_closed_form():
    r = 0.5
    probs = fock.squeezed_fock_distribution(r, 0, 10)
    n = np.arange(0, 11, 2)
    from math import factorial

    exact = [factorial(2 * m) / (4**m * factorial(m) ** 2) * np.tanh(r) ** (2 * m) / np.cosh(r) for m in range(6)]
    assert np.allclose(probs[n], exact, atol=1e-12)
    assert np.allclose(probs[1::2], 0.0, atol=1e-14)


def test_leak_probability_monotone():
    vals = [fock.leak_probability(0.3, 2, lam) for lam in (4, 8, 12, 16)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert fock.leak_probability(0.0, 2, 4) == pytest.approx(0.0, abs=1e-15)


def test_fidelity_normalizes():
    v = np.array([1.0, 1.0])
    assert fock.fidelity(2 * v, v) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fock.fidelity(np.zeros(2), v)
