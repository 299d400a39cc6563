import numpy as np
import pytest

import fock
from conftest import random_skew
from msfbraid.errors import ConfigError
from msfbraid.lattice import CouplingParams, LatticeGeometry, build_skew_matrix, defect_potential, majorana_form
from msfbraid.observables import (
    CovarianceMatrix,
    evolve_covariance,
    fusion_orientation,
    ground_covariance,
    local_mode_vector,
    mode_overlap,
    msf_correlation_series,
    pair_correlation,
    pfaffian,
    site_occupations,
)
from msfbraid.engine import step_generator
from msfbraid.spectral import mode_matrix, zero_modes


def _two_site_bdg(rng):
    h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    h = h + h.conj().T
    d = complex(rng.normal(), rng.normal())
    delta = np.array([[0, d], [-d, 0]])
    return majorana_form(h, delta)


class TestFockOracle:
    @pytest.mark.parametrize("seed", range(5))
    def test_ground_covariance_and_occupations(self, seed):
        rng = np.random.default_rng(seed)
        A = _two_site_bdg(rng)
        rho = fock.ground_state(A)
        G = ground_covariance(A)
        np.testing.assert_allclose(G.Gamma, fock.covariance(rho, 2), atol=1e-10)
        np.testing.assert_allclose(G.occupations(), fock.occupations(rho, 2), atol=1e-10)
        assert G.purity_error < 1e-12

    @pytest.mark.parametrize("beta", [0.3, 2.0])
    def test_thermal_covariance(self, beta):
        A = random_skew(np.random.default_rng(7), 6)
        rho = fock.thermal_state(A, beta)
        G = ground_covariance(A, beta=beta)
        np.testing.assert_allclose(G.Gamma, fock.covariance(rho, 3), atol=1e-10)

    def test_covariance_pushforward(self):
        rng = np.random.default_rng(3)
        A0, A1 = _two_site_bdg(rng), _two_site_bdg(rng)
        rho0 = fock.ground_state(A0)
        t = 0.77
        U = fock.unitary(A1, t)
        O = step_generator(A1, t)
        G_t = evolve_covariance(ground_covariance(A0).Gamma, O)
        np.testing.assert_allclose(G_t, fock.covariance(U @ rho0 @ U.conj().T, 2), atol=1e-10)


def test_single_site_vacuum():
    A = np.array([[0.0, 0.5], [-0.5, 0.0]])
    G = ground_covariance(A).Gamma
    assert G[0, 1] == -1.0
    assert site_occupations(G)[0] == 0.0
    G = ground_covariance(-A).Gamma
    assert site_occupations(G)[0] == 1.0


def test_zero_temperature_limit():
    A = random_skew(np.random.default_rng(11), 8)
    np.testing.assert_allclose(ground_covariance(A, beta=1e6).Gamma, ground_covariance(A).Gamma, atol=1e-12)


@pytest.fixture(scope="module")
def defect_state():
    geom = LatticeGeometry(12, 7)
    sites = [(x, 3) for x in range(2, 10)]
    A = build_skew_matrix(geom, defect_potential(geom, sites, 10.0, 0.1), CouplingParams())
    modes = mode_matrix(zero_modes(A, geom))
    return geom, A, modes


@pytest.mark.parametrize("sector", [1, -1])
def test_msf_sector_pins_zero_pair(defect_state, sector):
    geom, A, modes = defect_state
    G = ground_covariance(A, msf_sector=sector, modes=modes).Gamma
    C = modes.T @ G @ modes
    assert C[0, 1] == pytest.approx(sector, abs=1e-12)
    assert CovarianceMatrix(G).purity_error < 1e-10
    # the geometry path finds the same modes
    G2 = ground_covariance(A, msf_sector=sector, geom=geom).Gamma
    np.testing.assert_allclose(G2, G, atol=1e-10)


def test_msf_sector_validation(defect_state):
    _, A, modes = defect_state
    with pytest.raises(ConfigError):
        ground_covariance(A, msf_sector=0, modes=modes)


def test_correlation_series_at_t0(defect_state):
    geom, A, modes = defect_state
    G = ground_covariance(A, msf_sector=1, modes=modes).Gamma
    series = msf_correlation_series(modes, [modes, modes], G)
    assert series.shape == (2, 2, 2)
    assert series[0, 0, 1] == pytest.approx(1.0, abs=1e-12)
    # series equals O^T Gamma0 O evaluated on the modes
    O = step_generator(A + 0.01 * random_skew(np.random.default_rng(0), A.shape[0]), 1.3)
    s = msf_correlation_series(modes, [O @ modes], G)[0]
    np.testing.assert_allclose(s, modes.T @ (O.T @ G @ O) @ modes, atol=1e-12)


class TestPfaffian:
    @pytest.mark.parametrize("n", [2, 4, 6, 12])
    def test_square_is_det(self, rng, n):
        M = random_skew(rng, n)
        assert pfaffian(M) ** 2 == pytest.approx(np.linalg.det(M), rel=1e-10)

    def test_known_values(self):
        assert pfaffian(np.array([[0, 2.5], [-2.5, 0]])) == 2.5
        M = np.zeros((4, 4))
        M[0, 1], M[2, 3] = 2.0, 3.0
        M = M - M.T
        assert pfaffian(M) == pytest.approx(6.0)
        assert pfaffian(np.zeros((3, 3))) == 0.0

    def test_congruence(self, rng):
        M = random_skew(rng, 8)
        B = rng.normal(size=(8, 8))
        assert pfaffian(B @ M @ B.T) == pytest.approx(np.linalg.det(B) * pfaffian(M), rel=1e-9)

    def test_pair_correlation(self, rng):
        G = random_skew(rng, 6)
        assert pair_correlation(G, 1, 4) == G[1, 4]
        assert pair_correlation(G, 2, 2) == 0.0


def test_local_mode_overlap():
    geom = LatticeGeometry(3, 3)
    c = local_mode_vector(geom, (1, 2))
    assert mode_overlap(c, c) == pytest.approx(1.0)
    cd = local_mode_vector(geom, (1, 2), dagger=True)
    assert mode_overlap(c, cd) == pytest.approx(0.0, abs=1e-15)


def test_fusion_orientation():
    geom = LatticeGeometry(3, 3)
    r = geom.index(1, 1)
    a, b = np.zeros(18), np.zeros(18)
    a[2 * r], b[2 * r + 1] = 1.0, 1.0
    assert fusion_orientation(geom, (1, 1), a, b) == 1
    assert fusion_orientation(geom, (1, 1), a, -b) == -1
