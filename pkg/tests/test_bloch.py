import numpy as np
import pytest

from msfbraid.bloch import BlochParams, bloch_hamiltonian, chern_number, d_vector
from msfbraid.errors import ConfigError, GapClosedError


def test_hamiltonian_eigenvalues_are_pm_d():
    p = BlochParams(mu=0.7, J=1.0, Delta=0.9)
    k = (0.3, -1.1)
    w = np.linalg.eigvalsh(bloch_hamiltonian(k, p))
    d = np.linalg.norm(d_vector(k, p))
    np.testing.assert_allclose(w, [-d, d], atol=1e-14)


TABLE = [(-3.0, 0), (-1.0, -1), (-0.1, -1), (0.1, 1), (1.0, 1), (3.0, 0)]


@pytest.mark.parametrize("nk", [12, 24, 48])
@pytest.mark.parametrize("mu,c1", TABLE)
def test_chern_table(mu, c1, nk):
    assert chern_number(BlochParams(mu=mu), nk) == c1


def test_chern_is_independent_of_delta_sign_magnitude():
    # a larger pairing leaves the invariant unchanged
    assert chern_number(BlochParams(mu=1.0, Delta=2.5), 24) == 1


@pytest.mark.parametrize("mu", [2.0, -2.0, 0.0])
def test_gap_closing_raises(mu):
    with pytest.raises(GapClosedError, match="gap closed"):
        chern_number(BlochParams(mu=mu), 24)


def test_small_grid_rejected():
    with pytest.raises(ConfigError):
        chern_number(BlochParams(mu=1.0), 3)
