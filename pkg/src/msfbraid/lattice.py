"""Real-space p+ip lattice model in the Majorana basis.

Sites are indexed row-major, ``r = y * Lx + x``.  Each site carries two
Majorana operators ``gamma_A = c^dag + c`` and ``gamma_B = i (c^dag - c)``,
stored interleaved: Majorana index ``p = 2 r + beta`` with ``beta = 0`` for A
and ``1`` for B.  The Hamiltonian is written as

    H = (i/2) sum_pq A_pq gamma_p gamma_q,

with ``A`` a real antisymmetric ``2N x 2N`` matrix.  A single site with
potential ``mu`` gives ``A = [[0, mu/2], [-mu/2, 0]]``, i.e. ``H = mu c^dag c - mu/2``.

Real-space couplings are the inverse Fourier transform of the Bloch
Hamiltonian ``H(k) = d(k) . sigma`` with ``H = 1/2 sum_k psi_k^dag H(k) psi_k``:

* on-site ``mu_r c^dag c``,
* hopping ``-(J/2) c^dag_r c_{r+e} + h.c.`` on every nearest-neighbour bond,
* pairing ``-(i Delta/2) c^dag_r c^dag_{r+x} - (Delta/2) c^dag_r c^dag_{r+y} + h.c.``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError

RNG_ALGORITHM = "numpy.random.PCG64"


class Boundary(str, enum.Enum):
    OPEN = "open"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class LatticeGeometry:
    """Square lattice of ``Lx * Ly`` sites, lattice constant 1."""

    Lx: int
    Ly: int
    boundary_x: Boundary = Boundary.OPEN
    boundary_y: Boundary = Boundary.OPEN

    def __post_init__(self):
        if int(self.Lx) != self.Lx or int(self.Ly) != self.Ly:
            raise ConfigError("lattice dimensions must be integers")
        if self.Lx < 2 or self.Ly < 2:
            raise ConfigError(f"lattice must be at least 2x2, got {self.Lx}x{self.Ly}")
        object.__setattr__(self, "boundary_x", Boundary(self.boundary_x))
        object.__setattr__(self, "boundary_y", Boundary(self.boundary_y))

    @classmethod
    def torus(cls, Lx, Ly):
        return cls(Lx, Ly, Boundary.PERIODIC, Boundary.PERIODIC)

    @property
    def n_sites(self) -> int:
        return self.Lx * self.Ly

    @property
    def n_majorana(self) -> int:
        return 2 * self.n_sites

    def contains(self, x, y) -> bool:
        return 0 <= x < self.Lx and 0 <= y < self.Ly

    def index(self, x, y) -> int:
        if not self.contains(x, y):
            raise ConfigError(f"site ({x}, {y}) outside {self.Lx}x{self.Ly} lattice")
        return y * self.Lx + x

    def coords(self, r):
        return r % self.Lx, r // self.Lx

    def bonds(self):
        """Directed nearest-neighbour bonds ``(r, r + e, axis)``, one per site and axis.

        Periodic wrap-around bonds are included; on a 2-site periodic axis a
        pair of sites is linked twice, which reproduces ``cos k`` exactly.
        """
        out = []
        for y in range(self.Ly):
            for x in range(self.Lx):
                r = y * self.Lx + x
                if x + 1 < self.Lx:
                    out.append((r, r + 1, 0))
                elif self.boundary_x is Boundary.PERIODIC:
                    out.append((r, y * self.Lx, 0))
                if y + 1 < self.Ly:
                    out.append((r, r + self.Lx, 1))
                elif self.boundary_y is Boundary.PERIODIC:
                    out.append((r, x, 1))
        return out

    @cached_property
    def neighbor_lists(self):
        nbrs = [[] for _ in range(self.n_sites)]
        for r, s, _ in self.bonds():
            nbrs[r].append(s)
            nbrs[s].append(r)
        return tuple(tuple(n) for n in nbrs)

    @cached_property
    def site_xy(self) -> np.ndarray:
        """``(N, 2)`` array of site coordinates."""
        r = np.arange(self.n_sites)
        return np.stack([r % self.Lx, r // self.Lx], axis=1).astype(float)


@dataclass(frozen=True)
class CouplingParams:
    J: float = 1.0
    Delta: float = 1.0

    def __post_init__(self):
        if not self.J > 0:
            raise ConfigError(f"hopping J must be positive, got {self.J}")
        if self.Delta == 0 or not np.isfinite(self.Delta):
            raise ConfigError("pairing Delta must be finite and non-zero")


@dataclass(frozen=True)
class NoiseConfig:
    """Experimental imperfections.

    Attributes
    ----------
    alpha : float
        Fraction of a commanded potential change that lands on the addressed
        site; the remaining ``1 - alpha`` is split equally over its 4 nearest
        neighbours (weight falling off an open edge is dropped).
    V_T : float
        Harmonic trap strength.
    lambda_R : float
        Amplitude of the static uniform disorder in ``[-lambda_R, lambda_R]``.
    seed : int
        Seed of the disorder draw.
    """

    alpha: float = 1.0
    V_T: float = 0.0
    lambda_R: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.V_T < 0 or self.lambda_R < 0:
            raise ConfigError("V_T and lambda_R must be non-negative")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def is_ideal(self) -> bool:
        return self.alpha == 1.0 and self.V_T == 0.0 and self.lambda_R == 0.0


def _check_potential(geom, mu, name="mu"):
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (geom.n_sites,):
        raise ConfigError(f"{name} has shape {mu.shape}, expected ({geom.n_sites},)")
    if not np.all(np.isfinite(mu)):
        raise ConfigError(f"{name} contains non-finite entries")
    return mu


def defect_potential(geom, sites, mu0, mud) -> np.ndarray:
    """Background ``mu0`` everywhere, ``mud`` on the listed ``(x, y)`` sites."""
    mu = np.full(geom.n_sites, float(mu0))
    for x, y in sites:
        mu[geom.index(x, y)] = mud
    return mu


def majorana_form(h, delta) -> np.ndarray:
    """Convert a BdG Hamiltonian to its Majorana matrix ``A``.

    The input describes ``H = sum h_ij c^dag_i c_j + 1/2 sum (delta_ij c^dag_i c^dag_j + h.c.)``
    with ``h`` Hermitian and ``delta`` antisymmetric.  Returns real antisymmetric
    ``A`` with ``H = (i/2) sum A_pq gamma_p gamma_q + const`` in the interleaved
    Majorana ordering.
    """
    h = np.asarray(h, dtype=complex)
    delta = np.asarray(delta, dtype=complex)
    n = h.shape[0]
    bdg = np.block([[h, delta], [-delta.conj(), -h.conj()]])
    # Psi = (c, c^dag) = W gamma
    W = np.zeros((2 * n, 2 * n), dtype=complex)
    idx = np.arange(n)
    W[idx, 2 * idx] = 0.5
    W[idx, 2 * idx + 1] = 0.5j
    W[n + idx, 2 * idx] = 0.5
    W[n + idx, 2 * idx + 1] = -0.5j
    # H = 1/2 Psi^dag bdg Psi = 1/2 gamma^T (W^dag bdg W) gamma
    K = 0.5 * (W.conj().T @ bdg @ W)
    X = K.imag
    # (i/2) A = i Im(antisymmetric part of K)
    return X - X.T


def onsite_indices(n_sites):
    r = np.arange(n_sites)
    return 2 * r, 2 * r + 1


def add_onsite(A, mu) -> np.ndarray:
    """Return ``A`` plus the on-site blocks ``[[0, mu/2], [-mu/2, 0]]``."""
    A = np.array(A, dtype=float, copy=True)
    a, b = onsite_indices(len(mu))
    half = 0.5 * np.asarray(mu, dtype=float)
    A[a, b] += half
    A[b, a] -= half
    return A


def hopping_skew_matrix(geom: LatticeGeometry, cpl: CouplingParams) -> np.ndarray:
    """Hopping and pairing part of ``A`` (all potentials zero)."""
    n = geom.n_sites
    h = np.zeros((n, n), dtype=complex)
    delta = np.zeros((n, n), dtype=complex)
    pair = (-0.5j * cpl.Delta, -0.5 * cpl.Delta)
    for r, s, axis in geom.bonds():
        h[r, s] += -0.5 * cpl.J
        h[s, r] += -0.5 * cpl.J
        delta[r, s] += pair[axis]
        delta[s, r] -= pair[axis]
    return majorana_form(h, delta)


def build_skew_matrix(geom: LatticeGeometry, mu, cpl: CouplingParams) -> np.ndarray:
    """Assemble the ``2N x 2N`` Majorana Hamiltonian matrix.

    Parameters
    ----------
    geom : LatticeGeometry
    mu : array_like, shape (N,)
        Site chemical potentials.
    cpl : CouplingParams

    Returns
    -------
    numpy.ndarray
        Real matrix with ``A == -A.T`` exactly.
    """
    mu = _check_potential(geom, mu)
    return add_onsite(hopping_skew_matrix(geom, cpl), mu)


class NoiseModel:
    """Precomputed noise operator for a fixed geometry and configuration.

    ``apply(pot, base)`` is what :func:`apply_noise` evaluates; the disorder
    field is drawn once at construction so repeated calls inside a time
    evolution see the same quenched potential.
    """

    def __init__(self, geom: LatticeGeometry, cfg: NoiseConfig):
        self.geom = geom
        self.cfg = cfg
        n = geom.n_sites
        xy = geom.site_xy
        center = np.array([(geom.Lx - 1) / 2.0, (geom.Ly - 1) / 2.0])
        d2 = np.sum((xy - center) ** 2, axis=1)
        trap = cfg.V_T / (2.0 * (geom.Lx**2 + geom.Ly**2)) * d2
        if cfg.lambda_R > 0:
            rng = np.random.Generator(np.random.PCG64(int(cfg.seed)))
            disorder = rng.uniform(-cfg.lambda_R, cfg.lambda_R, size=n)
        else:
            disorder = np.zeros(n)
        self.trap = trap
        self.disorder = disorder
        self.static = trap + disorder
        nbr = geom.neighbor_lists
        self._rows = np.repeat(np.arange(n), [len(v) for v in nbr])
        self._cols = np.concatenate([np.asarray(v, dtype=int) for v in nbr])

    def apply(self, pot, base) -> np.ndarray:
        pot = _check_potential(self.geom, pot, "pot")
        base = _check_potential(self.geom, base, "base")
        out = pot.copy()
        alpha = self.cfg.alpha
        if alpha != 1.0:
            dev = pot - base
            spill = np.zeros_like(dev)
            np.add.at(spill, self._rows, dev[self._cols])
            out += (alpha - 1.0) * dev + 0.25 * (1.0 - alpha) * spill
        if self.cfg.V_T != 0.0 or self.cfg.lambda_R != 0.0:
            out += self.static
        return out


def apply_noise(pot, base, cfg: NoiseConfig, geom: LatticeGeometry) -> np.ndarray:
    """Apply crosstalk, trap and disorder to a commanded potential.

    Crosstalk acts on the commanded deviation ``pot - base``: a fraction
    ``alpha`` stays on each site and ``(1 - alpha)/4`` goes to every nearest
    neighbour.  The trap adds ``V_T d_r^2 / (2 (Lx^2 + Ly^2))`` with ``d_r``
    the distance from the lattice centre, and the disorder a static field
    drawn from ``cfg.seed``.
    """
    return NoiseModel(geom, cfg).apply(pot, base)
