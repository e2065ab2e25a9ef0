"""Classical Fisher information matrices for direct photon detection."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import model as _m
from .quadrature import QuadratureError, QuadratureSpec, integrate, integrate_box

__all__ = [
    "SymMatrix", "Scenario", "DensityFamily", "QuadratureSpec", "QuadratureError",
    "fim_functional", "fim_blinking", "fim_blinking_expected", "fim_cofluorescent", "fim_cofluorescent_1d",
    "apportion_counts", "mixture_family", "source_family", "psf_family",
    "rotation_matrix", "rotate_fim",
]


class SymMatrix:
    """Real symmetric matrix with one label per parameter.

    Used for information, covariance and precision matrices alike. Supports
    the numpy array protocol, so ``np.linalg`` functions accept it directly.
    """

    __array_priority__ = 10

    def __init__(self, values, labels=None, check=True):
        a = np.array(values, dtype=float)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("SymMatrix needs a square matrix")
        if check:
            asym = np.abs(a - a.T)
            if np.any(asym > 1e-12 * np.maximum(1.0, np.abs(a))):
                raise ValueError("matrix is not symmetric")
        a = 0.5 * (a + a.T)
        if labels is None:
            labels = tuple(f"p{i + 1}" for i in range(a.shape[0]))
        labels = tuple(labels)
        if len(labels) != a.shape[0]:
            raise ValueError("one label per row is required")
        a.setflags(write=False)
        self.values = a
        self.labels = labels

    @property
    def order(self):
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __getitem__(self, idx):
        return self.values[idx]

    def __repr__(self):
        return f"SymMatrix({self.values.tolist()!r}, labels={self.labels!r})"

    def _wrap(self, other, op):
        o = other.values if isinstance(other, SymMatrix) else other
        return SymMatrix(op(self.values, o), self.labels)

    def __add__(self, other):
        return self._wrap(other, np.add)

    def __sub__(self, other):
        return self._wrap(other, np.subtract)

    def __mul__(self, c):
        return SymMatrix(self.values * float(c), self.labels)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return SymMatrix(self.values / float(c), self.labels)

    def trace(self):
        return float(np.trace(self.values))

    def eigvalsh(self):
        return np.linalg.eigvalsh(self.values)

    def min_eigenvalue(self):
        return float(self.eigvalsh()[0])

    def is_psd(self, rel_tol=1e-9):
        scale = max(abs(self.trace()), np.finfo(float).tiny)
        return self.min_eigenvalue() >= -rel_tol * scale

    def allclose(self, other, rtol=1e-12, atol=0.0):
        return np.allclose(self.values, np.asarray(other, dtype=float), rtol=rtol, atol=atol)


@dataclass(frozen=True)
class Scenario:
    """Cofluorescent (all sources at once) or blinking (one source per window)."""

    tag: str
    counts: Optional[tuple] = None

    def __post_init__(self):
        if self.tag not in ("cofluorescent", "blinking"):
            raise ValueError(f"unknown scenario {self.tag!r}")
        if self.counts is not None:
            c = tuple(int(n) for n in self.counts)
            if any(n < 0 for n in c) or sum(c) == 0:
                raise ValueError("blinking counts must be nonnegative with at least one > 0")
            object.__setattr__(self, "counts", c)

    @classmethod
    def cofluorescent(cls):
        return cls("cofluorescent")

    @classmethod
    def blinking(cls, counts=None):
        return cls("blinking", None if counts is None else tuple(counts))

    @property
    def is_blinking(self):
        return self.tag == "blinking"

    def counts_for(self, model):
        if not self.is_blinking:
            raise ValueError("only blinking scenarios carry per-source counts")
        counts = apportion_counts(model.weights, model.photons) if self.counts is None \
            else np.asarray(self.counts)
        _check_counts(model, counts)
        return np.asarray(counts, dtype=int)


def apportion_counts(weights, photons):
    """Integer photon counts proportional to ``weights`` (largest remainder)."""
    w = np.asarray(weights, dtype=float)
    quota = w * photons
    base = np.floor(quota).astype(int)
    rest = int(photons - base.sum())
    # Ties broken by source index for determinism.
    order = np.argsort(-(quota - base), kind="stable")
    base[order[:rest]] += 1
    return base


def _check_counts(model, counts):
    counts = np.asarray(counts)
    if counts.shape != (model.n_sources,):
        raise ValueError(f"expected {model.n_sources} photon counts")
    if np.any(counts < 0) or counts.sum() != model.photons:
        raise ValueError(f"photon counts must be nonnegative and sum to N={model.photons}")


@dataclass
class DensityFamily:
    """A parametric density q(X|theta) together with its parameter gradient.

    ``pdf(X, theta)`` maps points of shape (n, l) to densities (n,);
    ``grad(X, theta)`` returns dq/dtheta with shape (n, M). Continuous
    families give ``box(theta)``, a list of (lo, hi) per coordinate of X;
    discrete families give ``support``, an (n, l) array of points, and the
    integral becomes a sum.
    """

    pdf: Callable
    grad: Callable
    n_params: int
    box: Optional[Callable] = None
    support: Optional[np.ndarray] = None
    scale: float = 1.0
    labels: Optional[Sequence[str]] = None


def fim_functional(family, theta, quad=QuadratureSpec()):
    """Fisher matrix: integral of (1/q) (dq/dtheta_i) (dq/dtheta_j) dX."""
    theta = np.asarray(theta, dtype=float)
    M = family.n_params

    def integrand(X):
        q = np.asarray(family.pdf(X, theta), dtype=float)
        g = np.asarray(family.grad(X, theta), dtype=float).reshape(len(X), M)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(q > 0, 1.0 / q, 0.0)
        return g[:, :, None] * g[:, None, :] * inv[:, None, None]

    if family.support is not None:
        X = np.asarray(family.support, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        vals = integrand(X)
        order = np.lexsort(X.T[::-1])
        F = vals[order].sum(axis=0)
    else:
        box = family.box(theta)
        panels = [max(1, int(np.ceil((hi - lo) / family.scale))) for lo, hi in box]
        F = integrate_box(integrand, box, quad, panels).value
    return SymMatrix(F, family.labels, check=False)


def mixture_family(model, half_width=8.0):
    """The cofluorescent per-photon density as a generic density family."""
    shape = model.positions.shape

    def as_model(theta):
        return model.with_theta(np.reshape(theta, shape))

    return DensityFamily(
        pdf=lambda X, th: _m.mixture_density(X, as_model(th)),
        grad=lambda X, th: _m.mixture_density_gradient(X, as_model(th)),
        n_params=model.n_params,
        box=lambda th: as_model(th).box(half_width),
        scale=model.sigma,
        labels=model.labels,
    )


def source_family(model, k, half_width=8.0):
    """Density of photons from source ``k`` alone, over the full parameter vector."""
    shape = model.positions.shape
    dim = model.dim
    sigma = model.sigma

    def pdf(X, th):
        rbar = np.reshape(th, shape)[k]
        return _m.single_source_density(X, rbar, sigma, dim)

    def grad(X, th):
        rbar = np.reshape(th, shape)[k]
        X = np.asarray(X, dtype=float).reshape(-1, dim)
        g = np.zeros((len(X), shape[0] * dim))
        p = _m.single_source_density(X, rbar, sigma, dim)
        g[:, k * dim:(k + 1) * dim] = p[:, None] * (X - rbar) / sigma**2
        return g

    def box(th):
        rbar = np.reshape(th, shape)[k]
        return [(c - half_width * sigma, c + half_width * sigma) for c in rbar]

    return DensityFamily(pdf=pdf, grad=grad, n_params=model.n_params, box=box,
                         scale=sigma, labels=model.labels)


def psf_family(psf, half_width=8.0, rotation=None):
    """Single-source family q(r|rbar) = psi^2(R r - R rbar) for an amplitude ``psf``.

    ``rotation`` (a dim x dim matrix) evaluates the PSF in rotated
    coordinates, as in the rotation-invariance condition.
    """
    dim = psf.dim
    R = np.eye(dim) if rotation is None else np.asarray(rotation, dtype=float)

    def pdf(X, th):
        u = (np.asarray(X, dtype=float).reshape(-1, dim) - th) @ R.T
        return psf.amplitude(u) ** 2

    def grad(X, th):
        u = (np.asarray(X, dtype=float).reshape(-1, dim) - th) @ R.T
        # d/d rbar of psi^2(R (r - rbar)) = -2 psi R^T grad psi
        return -2 * psf.amplitude(u)[:, None] * (psf.amplitude_grad(u) @ R)

    def box(th):
        return [(c - half_width * psf.width, c + half_width * psf.width) for c in th]

    return DensityFamily(pdf=pdf, grad=grad, n_params=dim, box=box, scale=psf.width,
                         labels=_m.param_labels(1, dim) if dim <= 2 else None)


def fim_blinking(model, counts=None):
    """Session FIM when each source emits alone: sum_k N_k F^[k], F^[k] = I/sigma^2 on block k."""
    counts = apportion_counts(model.weights, model.photons) if counts is None \
        else np.asarray(counts)
    _check_counts(model, counts)
    diag = np.repeat(np.asarray(counts, dtype=float), model.dim) / model.sigma**2
    return SymMatrix(np.diag(diag), model.labels)


def fim_blinking_expected(model):
    """Blinking FIM at the expected counts N mu_k, without integer rounding.

    This is the like-for-like reference for the cofluorescent FIM, which
    carries N mu_k implicitly.
    """
    diag = np.repeat(model.photons * model.weights, model.dim) / model.sigma**2
    return SymMatrix(np.diag(diag), model.labels)


def fim_cofluorescent(model, quad=QuadratureSpec()):
    """Session FIM N * F[p] for photons drawn from the brightness-weighted mixture."""
    F = fim_functional(mixture_family(model, quad.half_width), model.theta, quad)
    return SymMatrix(model.photons * F.values, model.labels, check=False)


def fim_cofluorescent_1d(model, quad=QuadratureSpec()):
    """1D cofluorescent FIM from the closed integrand

    F_ij = N mu_i mu_j / sigma^4 * int (x - x_i)(x - x_j) p_i p_j / p dx.

    Independent of :func:`fim_cofluorescent`, which goes through the generic
    functional; the two should agree to quadrature accuracy.
    """
    if model.dim != 1:
        raise ValueError("fim_cofluorescent_1d needs a 1D model")
    x_k = model.positions[:, 0]
    mu = model.weights
    s2 = model.sigma**2

    def integrand(x):
        d = x[:, None] - x_k[None, :]
        log_pk = -0.5 * np.log(2 * np.pi * s2) - d**2 / (2 * s2)
        log_p = _m.log_mixture_density(x, model)
        w = np.exp(log_pk[:, :, None] + log_pk[:, None, :] - log_p[:, None, None])
        return d[:, :, None] * d[:, None, :] * w

    (lo, hi), = model.box(quad.half_width)
    panels = max(1, int(np.ceil((hi - lo) / model.sigma)))
    J = integrate(integrand, lo, hi, quad, panels).value
    F = model.photons * np.outer(mu, mu) * J / s2**2
    return SymMatrix(F, model.labels, check=False)


def rotation_matrix(xi):
    """Orthogonal rotation O_xi = [[cos, -sin], [sin, cos]]."""
    c, s = np.cos(xi), np.sin(xi)
    return np.array([[c, -s], [s, c]])


def rotate_fim(F, O, labels=None):
    """Information about rotated parameters phi = O^T theta, i.e. O^T F O."""
    O = np.asarray(O, dtype=float)
    A = np.asarray(F, dtype=float)
    if O.shape != A.shape:
        raise ValueError("rotation and matrix orders differ")
    if not np.allclose(O.T @ O, np.eye(len(O)), rtol=0, atol=1e-12):
        raise ValueError("rotation matrix is not orthogonal")
    if labels is None:
        labels = tuple(f"phi{i + 1}" for i in range(len(O)))
    return SymMatrix(O.T @ A @ O, labels, check=False)
