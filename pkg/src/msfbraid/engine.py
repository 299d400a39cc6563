"""Time-ordered orthogonal propagator and braid-matrix extraction.

Sign convention
---------------
With ``H = (i/2) sum A_pq gamma_p gamma_q`` one finds
``i [H, gamma_p] = 2 sum_q A_pq gamma_q``.  The propagator ``O`` used here is
defined by ``U gamma_p U^dag = sum_q O_qp gamma_q`` with
``U = T exp(-i int H dt)``, which gives

    dO/dt = 2 A(t) O,        O(t + dt) = exp(2 A dt) O(t).

So the generator constant is ``GENERATOR_SCALE = +2`` and later times
multiply from the left.  A mode ``gamma = sum_p eta_p gamma_p`` is carried to
``U gamma U^dag`` with coefficients ``O eta``.  For one site with potential
``mu`` this is the rotation ``[[cos mu t, sin mu t], [-sin mu t, cos mu t]]``
of period ``2 pi / mu``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.special

from .errors import ConfigError, NumericError
from .lattice import CouplingParams, NoiseConfig, NoiseModel, defect_potential, hopping_skew_matrix
from .spectral import check_skew, match_modes_to_sites, mode_matrix, zero_modes

GENERATOR_SCALE = 2.0
REORTHOGONALIZE_EVERY = 100


def _spectral_exp(A, theta):
    """``expm(theta A)`` for real antisymmetric ``A`` and the spectrum of ``-A^2``.

    Uses ``-A^2 = Q diag(x) Q^T`` and the entire functions ``cos(theta sqrt x)``
    and ``sin(theta sqrt x)/sqrt x``, which stay well conditioned for
    degenerate or vanishing ``x``.  Returns the exponential and ``x``
    (ascending, each canonical energy squared appears twice).
    """
    x, Q = np.linalg.eigh(-(A @ A))
    x = np.clip(x, 0.0, None)
    s = np.sqrt(x)
    C = np.cos(theta * s)
    S = theta * np.sinc(theta * s / np.pi)
    R = (Q * C + (A @ Q) * S) @ Q.T
    return R, x


def _polar(O, iterations=2):
    """Nearest orthogonal matrix by Newton-Schulz steps ``O (3 - O^T O) / 2``.

    Converges quadratically to the polar factor for ``O`` close to
    orthogonal, which is all drift correction needs.
    """
    if not np.all(np.isfinite(O)):
        raise NumericError("propagator became non-finite")
    eye3 = 3.0 * np.eye(O.shape[0])
    for _ in range(iterations):
        O = 0.5 * O @ (eye3 - O.T @ O)
    return O


def orthogonality_error(O) -> float:
    return float(np.max(np.abs(O @ O.T - np.eye(O.shape[0]))))


def step_generator(A, dt) -> np.ndarray:
    """Orthogonal increment ``exp(GENERATOR_SCALE * A * dt)``.

    Exact up to rounding; the result lies in SO(2N).
    """
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    A = check_skew(A)
    R, _ = _spectral_exp(A, GENERATOR_SCALE * dt)
    return R


def gap_from_spectrum(x, n_exclude) -> float:
    """Quasiparticle gap ``2 sqrt(x[n_exclude])`` from the spectrum of ``-A^2``."""
    if n_exclude >= len(x):
        return float("inf")
    return float(2.0 * np.sqrt(x[n_exclude]))


def propagate(A_of_t, t0, t1, nsteps, O=None):
    """Midpoint-rule propagator for an arbitrary skew-matrix function of time."""
    if nsteps < 1:
        raise ConfigError("nsteps must be >= 1")
    dt = (t1 - t0) / nsteps
    O = np.eye(A_of_t(t0).shape[0]) if O is None else np.array(O, dtype=float)
    for k in range(nsteps):
        R, _ = _spectral_exp(A_of_t(t0 + (k + 0.5) * dt), GENERATOR_SCALE * dt)
        O = R @ O
        if (k + 1) % REORTHOGONALIZE_EVERY == 0:
            O = _polar(O)
    return O


def chebyshev_expmv(apply, rho, theta, V, tol=1e-17):
    """``expm(theta A) V`` for real antisymmetric ``A`` given as a matvec.

    Chebyshev-Bessel series: with ``Y = A / rho`` and ``z = theta rho``,
    ``exp(theta A) = J_0(z) + 2 sum_k J_k(z) u_k`` where ``u_0 = 1``,
    ``u_1 = Y`` and ``u_{k+1} = 2 Y u_k + u_{k-1}``; exact once the Bessel
    coefficients fall below ``tol``.  ``rho`` must bound the spectral radius.
    """
    z = theta * rho
    az = abs(z)
    kmax = int(az + 10.0 * max(az, 1.0) ** (1.0 / 3.0) + 20)
    c = scipy.special.jv(np.arange(kmax + 1), z)
    u_prev = V
    u = apply(V) / rho
    out = c[0] * V + 2.0 * c[1] * u
    for k in range(2, kmax + 1):
        u_prev, u = u, 2.0 * apply(u) / rho + u_prev
        out += 2.0 * c[k] * u
        if k > az and abs(c[k]) < tol and abs(c[k - 1]) < tol:
            break
    return out


@dataclass
class Checkpoint:
    t: float
    event: int
    orthogonality: float
    images: np.ndarray  # O @ eta, shape (2N, m)
    O: np.ndarray = None  # full propagator, only with keep_full


@dataclass
class Evolution:
    """Output of :func:`evolve`.

    ``O`` is the full propagator (``None`` in vector mode, where only
    ``modes`` and ``extra`` are pushed forward).  ``images = O @ modes`` and
    ``extra_images = O @ extra``; ``adjoint_images = O.T @ adjoint``.
    ``gap_t``/``gap`` sample the instantaneous gap above the tracked zero
    modes; checkpoints are taken at ``t = 0``, after every event, and every
    ``stride`` substeps.  In vector mode the checkpoint orthogonality is
    the Gram-matrix drift of the pushed vectors.
    """

    O: np.ndarray
    modes: np.ndarray
    images: np.ndarray
    checkpoints: list
    gap_t: np.ndarray
    gap: np.ndarray
    A0: np.ndarray
    A_final: np.ndarray
    steps: int = 0
    extra_images: np.ndarray = None
    adjoint_images: np.ndarray = None
    method: str = "dense"

    @property
    def max_orthogonality_error(self) -> float:
        return max(c.orthogonality for c in self.checkpoints)

    @property
    def min_gap(self) -> float:
        return float(np.min(self.gap)) if len(self.gap) else float("inf")


class Model:
    """Lattice plus couplings plus noise: maps a commanded potential to ``A``.

    Offers the dense matrix and a sparse matvec with a Gershgorin bound on
    the spectral radius.
    """

    def __init__(self, geom, cpl=None, noise=None, mu0=0.0):
        self.geom = geom
        self.cpl = cpl or CouplingParams()
        self.noise = NoiseModel(geom, noise or NoiseConfig())
        self.H0 = hopping_skew_matrix(geom, self.cpl)
        self.H0s = scipy.sparse.csr_matrix(self.H0)
        self._rowsum = np.abs(self.H0).sum(axis=1)
        self.base = np.full(geom.n_sites, float(mu0))
        self._a = 2 * np.arange(geom.n_sites)
        self._b = self._a + 1

    def effective(self, pot) -> np.ndarray:
        return self.noise.apply(pot, self.base)

    def skew_eff(self, mu) -> np.ndarray:
        A = self.H0.copy()
        A[self._a, self._b] += 0.5 * mu
        A[self._b, self._a] -= 0.5 * mu
        return A

    def skew(self, pot) -> np.ndarray:
        return self.skew_eff(self.effective(pot))

    def matvec(self, mu):
        h = 0.5 * mu[:, None]
        a, b = self._a, self._b

        def apply(V):
            Y = self.H0s @ V
            Y[a] += h * V[b]
            Y[b] -= h * V[a]
            return Y

        rho = float(np.max(self._rowsum + np.repeat(np.abs(0.5 * mu), 2)))
        return apply, max(rho, 1e-300)


def _site_indices(geom, schedule):
    try:
        return [geom.index(*ev.site) for ev in schedule.events]
    except ConfigError as exc:
        raise ConfigError(f"schedule does not fit the lattice: {exc}") from None


def _midpoints(schedule, sites, substeps):
    """Yield ``(event, substep, t_mid, dt, site_index, value)`` in time order."""
    for k, (ev, r) in enumerate(zip(schedule.events, sites)):
        dt = (ev.t_end - ev.t_start) / substeps
        for j in range(substeps):
            tm = ev.t_start + (j + 0.5) * dt
            yield k, j, tm, dt, r, float(ev.value(tm))


def _gram_drift(V, G0):
    if V.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(V.T @ V - G0)))


def evolve(
    schedule,
    geom,
    cpl=None,
    noise=None,
    substeps=None,
    stride=None,
    modes=None,
    track_sites=None,
    n_exclude=None,
    threshold=1e-6,
    keep_full=False,
    method="dense",
    extra=None,
    adjoint=None,
    gap_stride=None,
):
    """Integrate the propagator over a compiled schedule.

    Within every ramp event the potential is sampled at substep midpoints
    and the exact exponential of ``GENERATOR_SCALE * A`` is accumulated in
    time order.

    Parameters
    ----------
    schedule : Schedule
    geom : LatticeGeometry
    cpl : CouplingParams, optional
    noise : NoiseConfig, optional
        Applied to the commanded potential at every substep, and already to
        the initial Hamiltonian used for mode identification.
    substeps : int, optional
        Midpoint substeps per ramp event; defaults to ``schedule.substeps``.
    stride : int, optional
        Extra checkpoint every ``stride`` substeps.
    modes : ndarray, shape (2N, m), optional
        Mode vectors to track.  Default: zero modes of the initial
        Hamiltonian, ordered to match ``track_sites`` when given.
    n_exclude : int, optional
        Number of Majorana modes below the reported gap; default ``m``.
    keep_full : bool
        Keep the full propagator at each checkpoint (dense mode only).
    method : {"dense", "vector"}
        ``dense`` accumulates the full ``2N x 2N`` propagator from spectral
        exponentials.  ``vector`` pushes only ``modes`` and ``extra``
        through Chebyshev exponentials of the sparse Hamiltonian, which is
        much cheaper for large lattices.
    extra : ndarray, shape (2N, k), optional
        Further vectors to push forward.
    adjoint : ndarray, shape (2N, k), optional
        Vectors to pull back with ``O.T`` (vector mode runs a reverse pass).
    gap_stride : int, optional
        Vector mode: sample the gap every ``gap_stride`` substeps (default
        four samples per event).  Dense mode samples every substep.

    Returns
    -------
    Evolution
    """
    if method not in ("dense", "vector"):
        raise ConfigError(f"unknown evolution method {method!r}")
    substeps = int(schedule.substeps if substeps is None else substeps)
    if substeps < 1:
        raise ConfigError("substeps must be >= 1")
    sites = _site_indices(geom, schedule)
    model = Model(geom, cpl, noise, mu0=schedule.mu0)
    pot = defect_potential(geom, schedule.initial_sites, schedule.mu0, schedule.mud)
    A0 = model.skew(pot)
    n2 = A0.shape[0]
    if modes is None:
        found = zero_modes(A0, geom, threshold)
        if track_sites is not None:
            found = match_modes_to_sites(found, geom, track_sites)
        modes = mode_matrix(found) if found else np.zeros((n2, 0))
    modes = np.asarray(modes, dtype=float)
    if modes.shape[0] != n2:
        raise ConfigError("mode vectors do not match the lattice size")
    m = modes.shape[1]
    extra = np.zeros((n2, 0)) if extra is None else np.asarray(extra, dtype=float)
    if extra.shape[0] != n2:
        raise ConfigError("extra vectors do not match the lattice size")
    n_ex = m if n_exclude is None else int(n_exclude)
    if gap_stride is None:
        gap_stride = max(1, substeps // 4)

    dense = method == "dense"
    O = np.eye(n2) if dense else None
    V = np.concatenate([modes, extra], axis=1)
    G0 = V.T @ V
    cps = [Checkpoint(0.0, -1, 0.0, modes.copy(), O.copy() if keep_full and dense else None)]
    gap_t, gaps = [], []
    steps = 0
    for k, j, tm, dt, r, val in _midpoints(schedule, sites, substeps):
        pot[r] = val
        mu = model.effective(pot)
        if dense:
            R, x = _spectral_exp(model.skew_eff(mu), GENERATOR_SCALE * dt)
            O = R @ O
            gap_t.append(tm)
            gaps.append(gap_from_spectrum(x, n_ex))
        else:
            apply, rho = model.matvec(mu)
            V = chebyshev_expmv(apply, rho, GENERATOR_SCALE * dt, V)
            if j % gap_stride == gap_stride // 2:
                A = model.skew_eff(mu)
                x = np.linalg.eigvalsh(-(A @ A))
                gap_t.append(tm)
                gaps.append(gap_from_spectrum(np.clip(x, 0.0, None), n_ex))
        steps += 1
        if steps % REORTHOGONALIZE_EVERY == 0 and dense:
            O = _polar(O)
        if j == substeps - 1 or (stride and (j + 1) % stride == 0):
            t_cp = tm + 0.5 * dt
            if dense:
                err, img = orthogonality_error(O), O @ modes
            else:
                err, img = _gram_drift(V, G0), V[:, :m].copy()
            cps.append(Checkpoint(t_cp, k, err, img, O.copy() if keep_full and dense else None))
        if j == substeps - 1:
            pot[r] = schedule.events[k].mu_to
    A_final = model.skew(pot)

    if dense:
        if not np.all(np.isfinite(O)):
            raise NumericError("propagator became non-finite")
        images = O @ modes
        extra_images = O @ extra
    else:
        if not np.all(np.isfinite(V)):
            raise NumericError("propagated vectors became non-finite")
        images, extra_images = V[:, :m], V[:, m:]
    adjoint_images = None
    if adjoint is not None:
        W = np.asarray(adjoint, dtype=float)
        if dense:
            adjoint_images = O.T @ W
        else:
            adjoint_images = _pull_back(schedule, sites, substeps, model, W)
    return Evolution(
        O=O,
        modes=modes,
        images=images,
        checkpoints=cps,
        gap_t=np.array(gap_t),
        gap=np.array(gaps),
        A0=A0,
        A_final=A_final,
        steps=steps,
        extra_images=extra_images,
        adjoint_images=adjoint_images,
        method=method,
    )


def _pull_back(schedule, sites, substeps, model, W):
    """``O.T @ W``: apply the transposed steps in reverse time order."""
    pots = []
    pot = defect_potential(model.geom, schedule.initial_sites, schedule.mu0, schedule.mud)
    for k, j, tm, dt, r, val in _midpoints(schedule, sites, substeps):
        pot[r] = val
        pots.append((model.effective(pot), dt))
        if j == substeps - 1:
            pot[r] = schedule.events[k].mu_to
    for mu, dt in reversed(pots):
        apply, rho = model.matvec(mu)
        W = chebyshev_expmv(apply, rho, -GENERATOR_SCALE * dt, W)
    return W


@dataclass
class BraidResult:
    """Braid matrix over the tracked modes.

    ``B[i, j]`` is the overlap of evolved mode ``i`` with initial mode ``j``;
    ``leakage[i] = 1 - sum_j B[i, j]^2``.
    """

    B: np.ndarray
    leakage: np.ndarray
    gap_t: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gap: np.ndarray = field(default_factory=lambda: np.zeros(0))
    correlation_series: np.ndarray = None
    checkpoint_t: np.ndarray = None

    @property
    def min_gap(self) -> float:
        return float(np.min(self.gap)) if len(self.gap) else float("inf")


def braid_matrix(modes, O) -> np.ndarray:
    """``B_ij = eta_j^T O eta_i`` for mode vectors stored as columns."""
    modes = np.asarray(modes, dtype=float)
    return (O @ modes).T @ modes


def braid_result(evo: Evolution, correlations=None) -> BraidResult:
    B = evo.images.T @ evo.modes
    leak = 1.0 - np.sum(B**2, axis=1)
    return BraidResult(
        B=B,
        leakage=leak,
        gap_t=evo.gap_t,
        gap=evo.gap,
        correlation_series=correlations,
        checkpoint_t=np.array([c.t for c in evo.checkpoints]),
    )


def checkpoint_csv(evo: Evolution) -> str:
    """CSV of ``t``, gap at the preceding substep, ``B`` row-major, leakage per mode."""
    m = evo.modes.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["t", "gap"]
    head += [f"B_{i}_{j}" for i in range(m) for j in range(m)]
    head += [f"leakage_{i}" for i in range(m)]
    w.writerow(head)
    for cp in evo.checkpoints:
        B = cp.images.T @ evo.modes
        leak = 1.0 - np.sum(B**2, axis=1)
        if cp.event < 0 or not len(evo.gap):
            g = float("nan")
        else:
            g = float(np.interp(cp.t, evo.gap_t, evo.gap))
        w.writerow(["%.17g" % v for v in [cp.t, g, *B.ravel(), *leak]])
    return buf.getvalue()


def exchange_matrix():
    return np.array([[0.0, -1.0], [1.0, 0.0]])


def exchange_deviation(B) -> float:
    """Max-norm distance of a 2x2 block to the nearer of the two exchange orientations."""
    E = exchange_matrix()
    return float(min(np.max(np.abs(B - E)), np.max(np.abs(B - E.T))))


@dataclass
class NoncommutativityReport:
    """Braid matrices of ``a`` then ``b`` and of ``b`` then ``a`` over the same modes."""

    B_ab: np.ndarray
    B_ba: np.ndarray
    difference: float


def push_modes(schedules, geom, modes, **kw) -> np.ndarray:
    """Carry mode vectors through several schedules run back to back.

    Returns ``O_n ... O_1 @ modes``.  Keyword arguments go to
    :func:`evolve` (``method`` defaults to ``"vector"``).
    """
    kw.setdefault("method", "vector")
    V = np.asarray(modes, dtype=float)
    for sch in schedules:
        if sch.events:
            V = evolve(sch, geom, modes=V, **kw).images
    return V


def compose(first: Evolution, second: Evolution, modes=None) -> np.ndarray:
    """Braid matrix of ``first`` followed by ``second`` from stored dense propagators."""
    if first.O is None or second.O is None:
        raise ConfigError("compose needs dense evolutions; use push_modes for vector runs")
    modes = first.modes if modes is None else modes
    return braid_matrix(modes, second.O @ first.O)


def noncommutativity_check(schedule_a, schedule_b, geom, modes, **kw) -> NoncommutativityReport:
    """Compare ``a`` then ``b`` against ``b`` then ``a``.

    Both schedules must start from and restore the same defect layout.
    ``modes`` holds the tracked zero modes as columns; three evolutions
    are run (``b`` carries the initial modes and the images of ``a`` in one
    pass).
    """
    modes = np.asarray(modes, dtype=float)
    m = modes.shape[1]
    if schedule_a.initial_defects and schedule_b.initial_defects:
        if set(schedule_a.initial_sites) != set(schedule_b.initial_sites):
            raise ConfigError("the two programs start from different defect layouts")
    Ia = push_modes([schedule_a], geom, modes, **kw)
    both = push_modes([schedule_b], geom, np.concatenate([modes, Ia], axis=1), **kw)
    Ib, Iab = both[:, :m], both[:, m:]
    Iba = push_modes([schedule_a], geom, Ib, **kw)
    Bab = Iab.T @ modes
    Bba = Iba.T @ modes
    return NoncommutativityReport(Bab, Bba, float(np.max(np.abs(Bab - Bba))))


def ideal_exchange(m: int, j: int) -> np.ndarray:
    """Braid matrix of exchanging modes ``j`` and ``j + 1`` (0-based) in the
    row convention of :func:`braid_matrix`: ``gamma_j -> gamma_{j+1}``,
    ``gamma_{j+1} -> -gamma_j``."""
    B = np.eye(m)
    B[j, j] = B[j + 1, j + 1] = 0.0
    B[j, j + 1] = 1.0
    B[j + 1, j] = -1.0
    return B
