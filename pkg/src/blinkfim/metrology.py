"""Cramér-Rao bounds, eigenparameters and localization-efficiency measures.

Unbounded (infinite-variance) directions are carried as ``np.inf`` on the
covariance diagonal and flagged explicitly in :class:`BoundReport`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fim import SymMatrix

NULL_EPS = 1e-12
OVERLAP_TOL = 1e-9
DEGENERATE_TOL = 1e-10


class NotPSDError(ValueError):
    pass


@dataclass
class BoundReport:
    variances: np.ndarray       # (F^-1)_ii, inf where unbounded
    unbounded: np.ndarray       # bool per parameter
    rank: int
    covariance: SymMatrix       # pseudo-inverse on the bounded subspace
    precision: SymMatrix        # F restricted to the bounded subspace
    labels: tuple

    @property
    def bounded(self):
        return ~self.unbounded


def _labels(A, labels=None):
    if labels is not None:
        return tuple(labels)
    if isinstance(A, SymMatrix):
        return A.labels
    return tuple(f"p{i + 1}" for i in range(np.shape(A)[0]))


def invert_info(F, eps=NULL_EPS):
    """Cramér-Rao variance bounds L_ii = (F^-1)_ii for an information matrix.

    Eigenvalues at or below ``eps * lambda_max`` span a null space; any
    parameter overlapping it has an unbounded variance.
    """
    A = np.asarray(F, dtype=float)
    labels = _labels(F)
    lam, V = np.linalg.eigh(A)
    tr = float(np.trace(A))
    if lam[0] < -1e-9 * max(abs(tr), np.finfo(float).tiny):
        raise NotPSDError(f"information matrix is not PSD (min eigenvalue {lam[0]:.3e})")
    lam_max = lam[-1]
    keep = lam > eps * lam_max if lam_max > 0 else np.zeros(len(lam), dtype=bool)
    Vk = V[:, keep]
    pinv = (Vk / lam[keep]) @ Vk.T
    null_weight = np.sqrt((V[:, ~keep] ** 2).sum(axis=1))
    unbounded = null_weight > OVERLAP_TOL
    var = np.where(unbounded, np.inf, np.diag(pinv))
    prec = (Vk * lam[keep]) @ Vk.T
    return BoundReport(var, unbounded, int(keep.sum()), SymMatrix(pinv, labels, check=False),
                       SymMatrix(prec, labels, check=False), labels)


def _diag(cov):
    if isinstance(cov, BoundReport):
        return np.asarray(cov.variances, dtype=float)
    return np.diag(np.asarray(cov, dtype=float))


def h_tot(cov):
    """Average total precision M / Tr(Cov); zero once any variance is infinite."""
    d = _diag(cov)
    if np.any(np.isinf(d)):
        return 0.0
    return len(d) / float(d.sum())


def h_ind(cov):
    """Average individual precision (1/M) sum 1/Cov_ii; infinite variances add nothing."""
    d = _diag(cov)
    with np.errstate(divide="ignore"):
        prec = np.where(np.isinf(d), 0.0, 1.0 / d)
    return float(prec.mean())


def precision_matrix(cov):
    """Cov^-1, with zero precision on rows/columns of infinite variance."""
    if isinstance(cov, BoundReport):
        return np.array(cov.precision, dtype=float)
    C = np.asarray(cov, dtype=float)
    ok = ~np.isinf(np.diag(C))
    P = np.zeros_like(C)
    if ok.any():
        P[np.ix_(ok, ok)] = np.linalg.inv(C[np.ix_(ok, ok)])
    return P


def h_eig(cov):
    """Average eigenparameter precision Tr(Cov^-1) / M."""
    P = precision_matrix(cov)
    return float(np.trace(P)) / P.shape[0]


@dataclass
class EfficiencyReport:
    h_tot: float
    h_ind: float
    h_eig: float
    bound_tot: Optional[float] = None   # M / Tr(F^-1)
    bound_ind: Optional[float] = None   # average individual Fisher information
    bound_eig: Optional[float] = None   # Tr(F) / M

    def as_dict(self):
        return dict(self.__dict__)

    def ordered(self, rtol=1e-12):
        """H_tot <= H_ind <= H_eig within ``rtol``."""
        s = rtol * max(abs(self.h_eig), np.finfo(float).tiny)
        return self.h_tot <= self.h_ind + s and self.h_ind <= self.h_eig + s


def fisher_bounds(F):
    rep = invert_info(F)
    M = len(rep.variances)
    return h_tot(rep), h_ind(rep), float(np.trace(np.asarray(F, dtype=float))) / M


def efficiency(cov, info=None):
    """The three precision measures of a covariance, plus Fisher bounds if ``info`` is given."""
    rep = EfficiencyReport(h_tot(cov), h_ind(cov), h_eig(cov))
    if info is not None:
        rep.bound_tot, rep.bound_ind, rep.bound_eig = fisher_bounds(info)
    return rep


def saturated_efficiency(F):
    """Efficiency when the covariance equals the Cramér-Rao bound F^-1."""
    bt, bi, be = fisher_bounds(F)
    return EfficiencyReport(bt, bi, be, bt, bi, be)


@dataclass
class EigenReport:
    eigenvalues: np.ndarray     # nonincreasing
    eigenvectors: np.ndarray    # columns, matching eigenvalues
    xi: Optional[float] = None  # dominant-eigenvector angle for 2x2 matrices
    degenerate: bool = False


def _orient(V):
    V = V.copy()
    for j in range(V.shape[1]):
        nz = np.flatnonzero(np.abs(V[:, j]) > 1e-15)
        if nz.size and V[nz[0], j] < 0:
            V[:, j] = -V[:, j]
    return V


def eigen_analysis(F):
    """Sorted spectrum and eigenparameters.

    For two parameters the dominant eigenvector is (cos xi, sin xi), so
    b = x1 cos xi + x2 sin xi and w = x2 cos xi - x1 sin xi, with
    xi in (-pi/2, pi/2]. A degenerate pair gives xi = 0.
    """
    A = np.asarray(F, dtype=float)
    lam, V = np.linalg.eigh(A)
    lam, V = lam[::-1], V[:, ::-1]
    V = _orient(V)
    if A.shape != (2, 2):
        return EigenReport(lam, V)
    if abs(lam[0] - lam[1]) <= DEGENERATE_TOL * abs(lam[0] + lam[1]):
        return EigenReport(lam, np.eye(2), 0.0, True)
    c, s = V[:, 0]
    xi = float(np.arctan2(s, c))
    if xi <= -np.pi / 2:
        xi += np.pi
    # second column is the w direction (-sin xi, cos xi)
    V = np.array([[np.cos(xi), -np.sin(xi)], [np.sin(xi), np.cos(xi)]])
    return EigenReport(lam, V, xi, False)


def eigen_bounds(F):
    """Variance bounds (L_bb, L_ww, ...) for the eigenparameters; inf for zero eigenvalues."""
    rep = eigen_analysis(F)
    lam = rep.eigenvalues
    with np.errstate(divide="ignore"):
        L = np.where(lam > NULL_EPS * max(lam[0], 0.0), 1.0 / np.maximum(lam, 1e-300), np.inf)
    return L, rep
