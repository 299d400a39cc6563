"""Canonical form of real antisymmetric matrices, spectra and Majorana zero modes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError, NumericError

ZERO_THRESHOLD = 1e-6
# canonical energies below this (relative to ||A||) are treated as one
# degenerate cluster and re-paired by a real Schur decomposition
_CLUSTER_RTOL = 1e-7


@dataclass(frozen=True)
class CanonicalForm:
    """``O A O^T = diag_j [[0, -eps_j], [eps_j, 0]]`` with ``O`` in SO(2N).

    ``eps`` is sorted by magnitude.  All entries are non-negative except
    possibly ``eps[0]``, which carries the sign of the Pfaffian of ``A``
    relative to the canonical blocks (the ground-state fermion parity); this
    is what lets ``O`` keep unit determinant.
    """

    O: np.ndarray
    eps: np.ndarray

    @property
    def energies(self) -> np.ndarray:
        """Quasiparticle energies ``E_j = 2 |eps_j|``, ascending."""
        return 2.0 * np.abs(self.eps)

    def blocks(self) -> np.ndarray:
        n = len(self.eps)
        D = np.zeros((2 * n, 2 * n))
        j = np.arange(n)
        D[2 * j, 2 * j + 1] = -self.eps
        D[2 * j + 1, 2 * j] = self.eps
        return D

    def reconstruct(self) -> np.ndarray:
        return self.O.T @ self.blocks() @ self.O


def check_skew(A, name="A") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 2:
        raise ConfigError(f"{name} must be a square matrix of even size, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and np.max(np.abs(A + A.T)) > 1e-12 * scale:
        raise ConfigError(f"{name} is not antisymmetric")
    return A


def _pair_small_block(Ac):
    """Canonical pairs of a small antisymmetric matrix via real Schur form."""
    T, Z = scipy.linalg.schur(Ac, output="real")
    k = Ac.shape[0]
    rows, eps = [], []
    i = 0
    singles = []
    while i < k:
        if i + 1 < k and T[i + 1, i] != 0.0:
            a, b = Z[:, i], Z[:, i + 1]
            # block [[T_ii, T_i,i+1], [T_i+1,i, ...]] ~ [[0, -e], [e, 0]]
            e = 0.5 * (T[i + 1, i] - T[i, i + 1])
            rows += [a, b]
            eps.append(e)
            i += 2
        else:
            singles.append(Z[:, i])
            i += 1
    for a, b in zip(singles[::2], singles[1::2]):
        rows += [a, b]
        eps.append(float(b @ Ac @ a))
    return np.array(rows), np.array(eps)


def _fix_pair_gauge(a, b):
    """Rotate ``(a, b)`` within its plane so the dominant entry sits on ``a``, positive."""
    k = int(np.argmax(a * a + b * b))
    theta = np.arctan2(b[k], a[k])
    c, s = np.cos(theta), np.sin(theta)
    return c * a + s * b, -s * a + c * b


def canonical_form(A) -> CanonicalForm:
    """Block off-diagonalize a real antisymmetric matrix by an SO(2N) rotation.

    Uses the Hermitian eigendecomposition of ``iA``: an eigenvector
    ``v = (a + i b)/sqrt(2)`` with eigenvalue ``eps > 0`` spans the canonical
    plane ``(a, b)``.  Near-zero eigenvalues are re-paired from a real basis
    of their joint eigenspace.
    """
    A = check_skew(A)
    n2 = A.shape[0]
    w, V = np.linalg.eigh(1j * A)
    scale = max(1.0, float(np.max(np.abs(w)))) if n2 else 1.0
    tol = _CLUSTER_RTOL * scale
    pos = w > tol
    small = np.abs(w) <= tol
    rows, eps = [], []
    for lam, v in zip(w[pos], V[:, pos].T):
        a = np.sqrt(2.0) * v.real
        b = np.sqrt(2.0) * v.imag
        # A a = lam b, A b = -lam a  ->  block [[0, -lam], [lam, 0]]
        rows += [a, b]
        eps.append(lam)
    if np.any(small):
        Vs = V[:, small]
        basis = np.concatenate([Vs.real, Vs.imag], axis=1)
        U, sv, _ = np.linalg.svd(basis, full_matrices=False)
        B = U[:, : Vs.shape[1]]
        zr, ze = _pair_small_block(B.T @ A @ B)
        rows += list(zr @ B.T)
        eps += list(ze)
    O = np.array(rows).reshape(n2, n2)
    eps = np.array(eps, dtype=float)
    # orient every block to non-negative eps
    for j in np.nonzero(eps < 0)[0]:
        O[2 * j + 1] *= -1.0
        eps[j] = -eps[j]
    order = np.argsort(eps, kind="stable")
    eps = eps[order]
    O = O[np.stack([2 * order, 2 * order + 1], axis=1).ravel()]
    for j in range(len(eps)):
        O[2 * j], O[2 * j + 1] = _fix_pair_gauge(O[2 * j], O[2 * j + 1])
    # polar clean-up keeps rows orthonormal to working precision
    U, _, Vt = np.linalg.svd(O)
    O = U @ Vt
    sign, _ = np.linalg.slogdet(O)
    if sign < 0:
        O[1] *= -1.0
        eps[0] = -eps[0]
    return CanonicalForm(O=O, eps=eps)


@dataclass(frozen=True)
class SpectrumReport:
    energies: np.ndarray
    zero_mode_count: int
    splitting: float
    gap: float
    threshold: float


def quasiparticle_spectrum(A, threshold=ZERO_THRESHOLD) -> SpectrumReport:
    """Quasiparticle energies ``E_j = 2 eps_j`` and the zero-mode summary.

    ``zero_mode_count`` counts Majorana modes, two per canonical energy below
    ``threshold``; ``splitting`` is the largest of those energies (the
    near-zero pair splitting) and ``gap`` the lowest energy above them.
    """
    E = canonical_form(A).energies
    below = E < threshold
    n_below = int(np.sum(below))
    splitting = float(E[below].max()) if n_below else float("nan")
    gap = float(E[n_below]) if n_below < len(E) else float("inf")
    return SpectrumReport(
        energies=E, zero_mode_count=2 * n_below, splitting=splitting, gap=gap, threshold=threshold
    )


def instantaneous_gap(A, n_exclude: int) -> float:
    """Lowest quasiparticle energy after dropping ``n_exclude // 2`` canonical energies."""
    if n_exclude < 0 or n_exclude % 2:
        raise ConfigError("n_exclude must be a non-negative even number")
    E = canonical_form(A).energies
    return float(E[n_exclude // 2])


@dataclass(frozen=True)
class MajoranaMode:
    """Real unit vector ``eta`` with ``gamma = sum_p eta_p gamma_p``."""

    eta: np.ndarray
    energy: float

    def site_weight(self) -> np.ndarray:
        """Per-site weight ``eta_{r,A}^2 + eta_{r,B}^2``."""
        return self.eta[0::2] ** 2 + self.eta[1::2] ** 2

    def centroid(self, site_xy) -> np.ndarray:
        return self.site_weight() @ site_xy


def _position_operators(site_xy):
    return [np.repeat(site_xy[:, axis], 2) for axis in range(site_xy.shape[1])]


def localize(vectors, site_xy, sweeps=200, tol=1e-14) -> np.ndarray:
    """Rotate orthonormal columns to maximize the spread of their centroids.

    Jacobi sweeps of pairwise plane rotations maximizing
    ``sum_i |centroid_i|^2``; for two modes this is the rotation that
    maximizes the distance between the two centroids.  The span is preserved.
    """
    Q = np.array(vectors, dtype=float, copy=True)
    m = Q.shape[1]
    pos = _position_operators(site_xy)
    for _ in range(sweeps):
        changed = 0.0
        for i in range(m):
            for j in range(i + 1, m):
                qi, qj = Q[:, i], Q[:, j]
                M = np.zeros((2, 2))
                for X in pos:
                    a = qi @ (X * qi)
                    b = qj @ (X * qj)
                    c = qi @ (X * qj)
                    v = np.array([(a - b) / 2.0, c])
                    M += np.outer(v, v)
                w, U = np.linalg.eigh(M)
                c2, s2 = U[:, 1]
                two_theta = np.arctan2(s2, c2)
                # a quarter turn only swaps the pair; keep |theta| <= pi/4
                theta = (0.5 * two_theta + np.pi / 4) % (np.pi / 2) - np.pi / 4
                if abs(np.sin(theta)) < tol:
                    continue
                c, s = np.cos(theta), np.sin(theta)
                Q[:, i], Q[:, j] = c * qi + s * qj, -s * qi + c * qj
                changed = max(changed, abs(s))
        if changed < 1e-12:
            break
    return Q


def _sign_fix(v):
    k = int(np.argmax(np.abs(v)))
    return v if v[k] >= 0 else -v


def zero_modes(A, geom, threshold=ZERO_THRESHOLD):
    """Localized Majorana zero modes of ``A``.

    Every canonical energy below ``threshold`` contributes two real
    directions; the full near-zero subspace is rotated into end-localized
    modes (see :func:`localize`), each sign-fixed so its largest entry is
    positive, and ordered by centroid ``x`` then ``y``.

    Returns
    -------
    list of MajoranaMode
    """
    cf = canonical_form(A)
    E = cf.energies
    k = int(np.sum(E < threshold))
    if k == 0:
        return []
    Q = cf.O[: 2 * k].T
    if Q.shape[1] % 2:
        raise NumericError("odd number of near-zero Majorana directions; threshold misconfigured")
    site_xy = geom.site_xy
    Q = localize(Q, site_xy)
    modes = []
    for i in range(Q.shape[1]):
        eta = _sign_fix(Q[:, i] / np.linalg.norm(Q[:, i]))
        # |A eta| = |eps| for a canonical direction
        energy = float(2.0 * np.linalg.norm(A @ eta))
        modes.append(MajoranaMode(eta=eta, energy=energy))
    keys = [tuple(np.round(m.centroid(site_xy), 6)) for m in modes]
    order = sorted(range(len(modes)), key=lambda i: keys[i])
    return [modes[i] for i in order]


def mode_matrix(modes) -> np.ndarray:
    """Stack mode vectors as columns, shape ``(2N, m)``."""
    return np.stack([m.eta for m in modes], axis=1)


def match_modes_to_sites(modes, geom, sites):
    """Reorder ``modes`` so mode ``i`` is the one nearest to ``sites[i]``.

    Raises
    ------
    NumericError
        If the nearest-site assignment is not one-to-one.
    """
    if len(modes) != len(sites):
        raise NumericError(f"found {len(modes)} zero modes, expected {len(sites)}")
    xy = geom.site_xy
    cents = np.array([m.centroid(xy) for m in modes])
    out = []
    used = set()
    for s in sites:
        d = np.linalg.norm(cents - np.asarray(s, dtype=float), axis=1)
        i = int(np.argmin(d))
        if i in used:
            raise NumericError(f"zero-mode assignment ambiguous near site {s}")
        used.add(i)
        out.append(modes[i])
    return out
