"""Gaussian-state observables: covariance matrices, Majorana correlations, fusion readout.

For a state ``rho`` the covariance matrix is
``Gamma_pq = (i/2) Tr[rho (gamma_p gamma_q - gamma_q gamma_p)]``, so
``Gamma_pq = i <gamma_p gamma_q>`` for ``p != q``.  With the propagator
convention of :mod:`msfbraid.engine` the state at time ``t`` has covariance
``O Gamma_0 O^T`` and a mode ``eta`` is carried to ``O eta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError
from .spectral import ZERO_THRESHOLD, canonical_form, check_skew, mode_matrix, zero_modes


@dataclass(frozen=True)
class CovarianceMatrix:
    Gamma: np.ndarray

    def __post_init__(self):
        G = np.asarray(self.Gamma, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ConfigError("covariance matrix must be square")
        object.__setattr__(self, "Gamma", G)

    @property
    def purity_error(self) -> float:
        """``max |Gamma Gamma^T - I|``; zero for a pure Gaussian state."""
        G = self.Gamma
        return float(np.max(np.abs(G @ G.T - np.eye(G.shape[0]))))

    def occupations(self) -> np.ndarray:
        """Site occupations ``<c_r^dag c_r> = (1 + i<gamma_rA gamma_rB>)/2``."""
        return site_occupations(self.Gamma)

    def evolve(self, O) -> "CovarianceMatrix":
        return CovarianceMatrix(evolve_covariance(self.Gamma, O))


def _pair_blocks(n_pairs, eta):
    D = np.zeros((2 * n_pairs, 2 * n_pairs))
    j = np.arange(n_pairs)
    D[2 * j, 2 * j + 1] = eta
    D[2 * j + 1, 2 * j] = -eta
    return D


def _sector_signs(msf_sector, n_pairs):
    s = np.broadcast_to(np.asarray(msf_sector, dtype=float), (n_pairs,)).copy()
    if not np.all(np.isin(s, (-1.0, 1.0))):
        raise ConfigError(f"msf_sector entries must be +1 or -1, got {msf_sector!r}")
    return s


def ground_covariance(
    A,
    msf_sector=1,
    geom=None,
    modes=None,
    beta=None,
    threshold=ZERO_THRESHOLD,
) -> CovarianceMatrix:
    """Covariance matrix of the ground (or thermal) state of ``A``.

    A canonical pair with block ``[[0, -eps], [eps, 0]]`` carries the energy
    ``E = 2|eps|``; its ground state has ``i<a b> = sgn(eps)``, and at
    inverse temperature ``beta`` the value ``tanh(beta * eps)``, i.e.
    ``tanh(beta E / 2)`` with the sign of ``eps``.

    Pairs below ``threshold`` are zero modes.  Their correlations are pinned
    instead of read off the vanishing splitting: with localized modes
    ``gamma_1, gamma_2, ...`` (from ``modes`` columns, else from
    :func:`~msfbraid.spectral.zero_modes` on ``geom``) the state has
    ``i<gamma_{2k+1} gamma_{2k+2}> = msf_sector[k]``.

    Parameters
    ----------
    A : ndarray
        Real antisymmetric ``2N x 2N`` matrix.
    msf_sector : int or sequence of int
        ``+1`` or ``-1`` per zero-mode pair.
    geom : LatticeGeometry, optional
        Used to localize the zero modes when ``modes`` is not given.  With
        neither, the canonical zero pairs are pinned as returned by
        :func:`~msfbraid.spectral.canonical_form`.
    modes : ndarray, shape (2N, 2m), optional
    beta : float, optional
        Inverse temperature; ``None`` means zero temperature.
    """
    A = check_skew(A)
    cf = canonical_form(A)
    eps = cf.eps
    zero = cf.energies < threshold
    n_zero = int(np.sum(zero))
    if beta is None:
        eta = np.sign(eps)
        eta[eta == 0] = 1.0
    else:
        if not beta > 0:
            raise ConfigError(f"beta must be positive, got {beta}")
        eta = np.tanh(beta * eps)
    signs = _sector_signs(msf_sector, max(n_zero, 1))[:n_zero]
    if n_zero == 0:
        return CovarianceMatrix(cf.O.T @ _pair_blocks(len(eps), eta) @ cf.O)

    gapped = cf.O[2 * n_zero :]
    G = gapped.T @ _pair_blocks(len(eps) - n_zero, eta[n_zero:]) @ gapped
    if modes is None and geom is not None:
        found = zero_modes(A, geom, threshold)
        modes = mode_matrix(found)
    if modes is None:
        Z = cf.O[: 2 * n_zero]
    else:
        Z = np.asarray(modes, dtype=float).T
        if Z.shape[0] != 2 * n_zero:
            raise NumericError(f"expected {2 * n_zero} zero-mode vectors, got {Z.shape[0]}")
    G += Z.T @ _pair_blocks(n_zero, signs) @ Z
    return CovarianceMatrix(G)


def pair_correlation(Gamma, p: int, q: int) -> float:
    """``i<gamma_p gamma_q>`` as the Pfaffian of the 2x2 principal submatrix.

    ``p == q`` returns 0: the constant ``<gamma_p^2> = 1`` is not a
    correlation and is excluded by convention.
    """
    if p == q:
        return 0.0
    G = np.asarray(Gamma)
    sub = G[np.ix_([p, q], [p, q])]
    return float(pfaffian(sub))


def pfaffian(M) -> float:
    """Pfaffian of a real antisymmetric matrix by Parlett-Reid elimination."""
    M = np.array(M, dtype=float, copy=True)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ConfigError("pfaffian needs a square matrix")
    if n % 2:
        return 0.0
    pf = 1.0
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(M[k + 1 :, k])))
        if kp != k + 1:
            M[[k + 1, kp]] = M[[kp, k + 1]]
            M[:, [k + 1, kp]] = M[:, [kp, k + 1]]
            pf = -pf
        piv = M[k + 1, k]
        if piv == 0.0:
            return 0.0
        pf *= M[k, k + 1]
        if k + 2 < n:
            tau = M[k, k + 2 :] / M[k, k + 1]
            # rank-2 update keeps the trailing block antisymmetric
            M[k + 2 :, k + 2 :] += np.outer(tau, M[k + 2 :, k + 1]) - np.outer(M[k + 2 :, k + 1], tau)
    return float(pf)


def evolve_covariance(Gamma0, O) -> np.ndarray:
    """State covariance after the propagator ``O``: ``O Gamma0 O^T``."""
    return O @ Gamma0 @ O.T


def site_occupations(Gamma) -> np.ndarray:
    G = np.asarray(Gamma)
    a = np.arange(0, G.shape[0], 2)
    return 0.5 * (1.0 + G[a, a + 1])


def msf_correlation_series(modes, images_or_checkpoints, Gamma0) -> np.ndarray:
    """``i<gamma_i(t) gamma_j(t)> = (O eta_i)^T Gamma0 (O eta_j)`` per checkpoint.

    Parameters
    ----------
    modes : ndarray, shape (2N, m)
        Unused beyond shape checks; kept so the call mirrors the braid API.
    images_or_checkpoints : sequence
        Either :class:`~msfbraid.engine.Checkpoint` objects or arrays
        ``O @ modes`` of shape ``(2N, m)``.
    Gamma0 : ndarray or CovarianceMatrix

    Returns
    -------
    ndarray, shape (n_checkpoints, m, m)
    """
    G0 = Gamma0.Gamma if isinstance(Gamma0, CovarianceMatrix) else np.asarray(Gamma0)
    m = np.asarray(modes).shape[1]
    out = []
    for item in images_or_checkpoints:
        V = getattr(item, "images", item)
        if V.shape[1] != m:
            raise ConfigError("checkpoint images do not match the number of modes")
        C = V.T @ G0 @ V
        out.append(0.5 * (C - C.T))
    return np.array(out).reshape(len(out), m, m)


def local_mode_vector(geom, site, dagger=False) -> np.ndarray:
    """Complex coefficient vector of ``c_r = (gamma_rA + i gamma_rB)/2`` (or ``c_r^dag``)."""
    r = geom.index(*site)
    u = np.zeros(geom.n_majorana, dtype=complex)
    u[2 * r] = 0.5
    u[2 * r + 1] = -0.5j if dagger else 0.5j
    return u


def mode_overlap(u, v) -> float:
    """``2 |u^dag v|``; equals 1 when ``v`` is exactly the local mode ``u``."""
    return float(2.0 * abs(np.vdot(u, v)))


@dataclass
class FusionReport:
    """Fusion of two zero modes onto the site ``r0``.

    ``overlap_series`` is ``2|<c_r0, v(t)>|`` with ``v = (O eta_1 + i O eta_2)/2``;
    ``orientation`` is ``+1`` when the pair ends on ``c_r0`` and ``-1`` when
    it ends on ``c_r0^dag`` (the series then uses ``c_r0^dag``).
    ``occupation`` maps each initial sector of ``i gamma_1 gamma_2`` to the
    final ``<n_r0>``; ``readout_fidelity`` is the worst-case probability
    that the rule ``n > 1/2 <-> sector = orientation`` reports the sector.
    """

    r0: tuple
    t: np.ndarray
    overlap_series: np.ndarray
    final_fidelity: float
    orientation: int
    occupation: dict = field(default_factory=dict)
    readout_fidelity: float = float("nan")
    sector: int = 1

    @property
    def occupation_expectation(self) -> float:
        return self.occupation[self.sector]

    @property
    def initial_overlap(self) -> float:
        return float(self.overlap_series[0])


def fusion_orientation(geom, r0, image1, image2) -> int:
    """Handedness of the final pair relative to ``(gamma_r0A, gamma_r0B)``."""
    r = geom.index(*r0)
    M = np.array([[image1[2 * r], image2[2 * r]], [image1[2 * r + 1], image2[2 * r + 1]]])
    return 1 if np.linalg.det(M) >= 0 else -1


def fusion_report(
    schedule,
    geom,
    cpl=None,
    noise=None,
    substeps=None,
    method="vector",
    sector=1,
    threshold=ZERO_THRESHOLD,
    evolution=None,
) -> FusionReport:
    """Run (or reuse) a fusion evolution and read out mode overlap and occupation.

    The final occupation of ``r0`` is ``(1 + Gamma(T)_{r0A, r0B})/2`` with
    ``Gamma(T) = O Gamma0 O^T``; it is evaluated by pulling the two local
    Majorana vectors back with ``O^T`` so no full propagator is needed.
    Both initial sectors of ``i gamma_1 gamma_2`` are read out.
    """
    from .engine import evolve

    final = schedule.final_sites
    if len(final) != 1:
        raise ConfigError(f"fusion schedule must end on a single site, ends on {len(final)}")
    r0 = tuple(final[0])
    r = geom.index(*r0)
    e = np.zeros((geom.n_majorana, 2))
    e[2 * r, 0] = 1.0
    e[2 * r + 1, 1] = 1.0
    evo = evolution
    if evo is None:
        evo = evolve(schedule, geom, cpl=cpl, noise=noise, substeps=substeps, method=method,
                     threshold=threshold, adjoint=e)
    if evo.modes.shape[1] != 2:
        raise NumericError(f"fusion needs exactly two zero modes, found {evo.modes.shape[1]}")
    if evo.adjoint_images is None:
        raise ConfigError("fusion evolution must pull back the r0 Majorana vectors")
    img = evo.images
    orient = fusion_orientation(geom, r0, img[:, 0], img[:, 1])
    u = local_mode_vector(geom, r0, dagger=orient < 0)
    ts, ov = [], []
    for cp in evo.checkpoints:
        v = 0.5 * (cp.images[:, 0] + 1j * cp.images[:, 1])
        ts.append(cp.t)
        ov.append(mode_overlap(u, v))
    W = evo.adjoint_images
    occ = {}
    for s in (1, -1):
        G0 = ground_covariance(evo.A0, msf_sector=s, modes=evo.modes, threshold=threshold).Gamma
        occ[s] = float(0.5 * (1.0 + W[:, 0] @ G0 @ W[:, 1]))
    # sector s should read as occupied exactly when s * orientation > 0
    probs = [occ[s] if s * orient > 0 else 1.0 - occ[s] for s in (1, -1)]
    return FusionReport(
        r0=r0,
        t=np.array(ts),
        overlap_series=np.array(ov),
        final_fidelity=float(ov[-1]),
        orientation=orient,
        occupation=occ,
        readout_fidelity=float(min(probs)),
        sector=int(sector),
    )
