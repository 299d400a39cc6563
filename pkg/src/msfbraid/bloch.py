"""Momentum-space diagnostics of the uniform p+ip superfluid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GapClosedError

DEFAULT_NK = 24


@dataclass(frozen=True)
class BlochParams:
    mu: float
    J: float = 1.0
    Delta: float = 1.0

    def __post_init__(self):
        if not self.J > 0:
            raise ConfigError("J must be positive")
        if self.Delta == 0:
            raise ConfigError("Delta must be non-zero")


def d_vector(k, p: BlochParams):
    """Return ``(d_x, d_y, d_z)`` at momentum ``k = (kx, ky)``.

    Works elementwise on arrays of momenta.
    """
    kx, ky = k
    kx = np.asarray(kx, dtype=float)
    ky = np.asarray(ky, dtype=float)
    return (
        p.Delta * np.sin(kx),
        p.Delta * np.sin(ky),
        p.mu - p.J * (np.cos(kx) + np.cos(ky)),
    )


def band_energies(k, p: BlochParams):
    dx, dy, dz = d_vector(k, p)
    e = np.sqrt(dx**2 + dy**2 + dz**2)
    return -e, e


def bloch_hamiltonian(k, p: BlochParams) -> np.ndarray:
    dx, dy, dz = d_vector(k, p)
    return np.array([[dz, dx - 1j * dy], [dx + 1j * dy, -dz]])


def bz_grid(nk: int):
    if nk < 4:
        raise ConfigError(f"Brillouin-zone grid needs Nk >= 4, got {nk}")
    k = 2.0 * np.pi * np.arange(nk) / nk
    return np.meshgrid(k, k, indexing="ij")


def _lower_band_states(p, nk, gap_tol=1e-6):
    kx, ky = bz_grid(nk)
    dx, dy, dz = d_vector((kx, ky), p)
    e = np.sqrt(dx**2 + dy**2 + dz**2)
    if e.min() <= gap_tol * p.J:
        raise GapClosedError(
            f"gap closed: min |d(k)| = {e.min():.3g} on the {nk}x{nk} grid (mu={p.mu})"
        )
    # closed-form lower eigenvector of d.sigma, two gauge patches to avoid the
    # singular north/south poles of the Bloch sphere
    north = np.stack([dx - 1j * dy, -(e + dz)], axis=-1)
    south = np.stack([-(e - dz), dx + 1j * dy], axis=-1)
    use_south = dz <= 0
    u = np.where(use_south[..., None], south, north)
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    return u, e


def plaquette_phases(p: BlochParams, nk: int = DEFAULT_NK, gap_tol: float = 1e-6):
    """Berry phase through each plaquette of the discretized Brillouin zone.

    Link variables ``U_nu(k) = <u(k)|u(k + dk_nu)> / |...|`` of the lower band
    are multiplied around every plaquette; the returned array holds the
    principal-branch argument of each product.  Gauge independent.
    """
    u, _ = _lower_band_states(p, nk, gap_tol)

    def link(axis):
        v = np.roll(u, -1, axis=axis)
        z = np.sum(u.conj() * v, axis=-1)
        return z / np.abs(z)

    ux, uy = link(0), link(1)
    prod = ux * np.roll(uy, -1, axis=0) * np.roll(ux, -1, axis=1).conj() * uy.conj()
    return np.angle(prod)


def berry_flux_total(p: BlochParams, nk: int = DEFAULT_NK) -> float:
    """Sum of plaquette Berry phases, an integer multiple of ``2 pi`` up to rounding."""
    return float(np.sum(plaquette_phases(p, nk)))


def chern_number(p: BlochParams, nk: int = DEFAULT_NK, gap_tol: float = 1e-6) -> int:
    """First Chern number of the lower band by the lattice field-strength method.

    The sign convention gives ``C1 = sign(mu)`` for ``0 < |mu| < 2J`` and
    ``C1 = 0`` for ``|mu| > 2J``.

    Raises
    ------
    GapClosedError
        If ``min |d(k)|`` on the grid is below ``gap_tol * J``.
    """
    flux = np.sum(plaquette_phases(p, nk, gap_tol))
    return int(np.rint(CHERN_SIGN * flux / (2.0 * np.pi)))


# Orientation: with A_nu = <u|i d_nu u>, C1 = -(1/2pi) int F equals the
# plaquette-phase sum over 2pi; this reproduces C1 = sign(mu) for the d-vector above.
CHERN_SIGN = 1
