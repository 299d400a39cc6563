import numpy as np
import pytest

from msfbraid.errors import ConfigError, NumericError
from msfbraid.lattice import CouplingParams, LatticeGeometry, build_skew_matrix, defect_potential
from msfbraid.observables import pfaffian
from msfbraid.spectral import (
    canonical_form,
    instantaneous_gap,
    localize,
    match_modes_to_sites,
    mode_matrix,
    quasiparticle_spectrum,
    zero_modes,
)

from conftest import random_skew


@pytest.mark.parametrize("n", [2, 4, 10, 31])
def test_canonical_form_reconstructs(rng, n):
    A = random_skew(rng, 2 * n)
    cf = canonical_form(A)
    np.testing.assert_allclose(cf.O @ cf.O.T, np.eye(2 * n), atol=1e-12)
    assert np.linalg.det(cf.O) == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(cf.reconstruct(), A, atol=1e-11)
    assert np.all(np.diff(np.abs(cf.eps)) >= -1e-12)
    assert np.all(cf.eps[1:] >= 0)


def test_leading_sign_is_pfaffian_sign(rng):
    for _ in range(10):
        A = random_skew(rng, 8)
        cf = canonical_form(A)
        # Pf(O^T D O) = det(O) Pf(D) = prod(-eps)... with Pf([[0,-e],[e,0]]) = -e
        assert np.sign(pfaffian(A)) == np.sign(np.prod(-cf.eps))


def test_single_block_energy():
    mu = 0.8
    A = np.array([[0.0, mu / 2], [-mu / 2, 0.0]])
    assert canonical_form(A).energies[0] == pytest.approx(mu)


def test_degenerate_zero_block(rng):
    # two exact zero pairs together with a finite block
    O = np.linalg.qr(rng.normal(size=(6, 6)))[0]
    D = np.zeros((6, 6))
    D[4, 5], D[5, 4] = -0.7, 0.7
    A = O.T @ D @ O
    A = 0.5 * (A - A.T)
    cf = canonical_form(A)
    np.testing.assert_allclose(np.abs(cf.eps), [0, 0, 0.7], atol=1e-12)
    np.testing.assert_allclose(cf.reconstruct(), A, atol=1e-12)


def test_rejects_non_skew():
    with pytest.raises(ConfigError):
        canonical_form(np.eye(2))
    with pytest.raises(ConfigError):
        canonical_form(np.zeros((3, 3)))


@pytest.fixture(scope="module")
def line_matrix():
    geom = LatticeGeometry(18, 10)
    sites = [(x, 5) for x in range(2, 16)]
    return geom, build_skew_matrix(geom, defect_potential(geom, sites, 10.0, 0.1), CouplingParams())


def test_line_defect_spectrum(line_matrix):
    _, A = line_matrix
    rep = quasiparticle_spectrum(A)
    assert rep.zero_mode_count == 2
    assert rep.splitting < 1e-8
    assert 0.5 <= rep.gap <= 1.5
    assert instantaneous_gap(A, 2) == pytest.approx(rep.gap)


def test_zero_modes_are_localized_at_the_ends(line_matrix):
    geom, A = line_matrix
    modes = match_modes_to_sites(zero_modes(A, geom), geom, [(2, 5), (15, 5)])
    xy = geom.site_xy
    for m, end in zip(modes, [(2, 5), (15, 5)]):
        near = np.linalg.norm(xy - np.array(end), axis=1) <= 3
        assert m.site_weight()[near].sum() >= 0.9
        assert np.linalg.norm(A @ m.eta) < 1e-8
    V = mode_matrix(modes)
    np.testing.assert_allclose(V.T @ V, np.eye(2), atol=1e-12)


def test_four_degenerate_modes_each_sit_at_one_end():
    # two parallel defects: the 4-dim zero space must split into 4 end modes
    geom = LatticeGeometry(12, 28)
    d = 0.91
    sites = [(x, 9) for x in range(2, 10)] + [(x, 18) for x in range(2, 10)]
    A = build_skew_matrix(geom, defect_potential(geom, sites, 10 * d, 0.1 * d), CouplingParams(1.0, d))
    ends = [(2, 9), (9, 9), (9, 18), (2, 18)]
    modes = match_modes_to_sites(zero_modes(A, geom), geom, ends)
    xy = geom.site_xy
    for m, end in zip(modes, ends):
        near = np.linalg.norm(xy - np.array(end), axis=1) <= 3
        assert m.site_weight()[near].sum() >= 0.9


def test_localize_ignores_column_order(rng):
    geom = LatticeGeometry(12, 28)
    sites = [(x, 9) for x in range(2, 10)] + [(x, 18) for x in range(2, 10)]
    A = build_skew_matrix(geom, defect_potential(geom, sites, 10.0, 0.1), CouplingParams())
    base = mode_matrix(zero_modes(A, geom))
    R, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    L = localize(base @ R, geom.site_xy)
    # same span, and each column overlaps one localized mode almost fully
    overlap = np.abs(base.T @ L)
    np.testing.assert_allclose(np.sort(overlap.max(axis=0)), np.ones(4), atol=1e-3)


def test_match_modes_count_mismatch(line_matrix):
    geom, A = line_matrix
    with pytest.raises(NumericError):
        match_modes_to_sites(zero_modes(A, geom), geom, [(2, 5)])


def test_zero_modes_empty_in_trivial_phase():
    geom = LatticeGeometry(6, 6)
    A = build_skew_matrix(geom, np.full(36, 10.0), CouplingParams())
    assert zero_modes(A, geom) == []


def test_non_finite_is_numeric_error():
    A = np.array([[0.0, np.nan], [-np.nan, 0.0]])
    with pytest.raises(NumericError):
        canonical_form(A)
