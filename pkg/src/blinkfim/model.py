"""Gaussian PSF and the per-photon detection densities.

Positions are image-plane coordinates (unit magnification). Parameters are
ordered source by source: ``x1, y1, x2, y2, ...`` in 2D, ``x1, x2, ...`` in 1D.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

MIXED = "mixed"


def psf_amplitude(x, sigma):
    """Real Gaussian impulse response; its square integrates to one."""
    if np.any(np.asarray(sigma) <= 0):
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=float)
    return (2 * np.pi * sigma**2) ** -0.25 * np.exp(-x**2 / (4 * sigma**2))


@dataclass(frozen=True, eq=False)
class SourceModel:
    """K incoherent point emitters seen through an isotropic Gaussian PSF."""

    positions: np.ndarray
    weights: np.ndarray
    sigma: float
    photons: int
    dim: int = field(init=False)

    def __init__(self, positions, weights=None, sigma=1.0, photons=1):
        pos = np.asarray(positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if pos.ndim != 2 or pos.shape[0] < 1 or pos.shape[1] not in (1, 2):
            raise ValueError("positions must be K scalars (1D) or K pairs (2D)")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        k = pos.shape[0]
        w = np.full(k, 1.0 / k) if weights is None else np.asarray(weights, dtype=float).ravel()
        if w.shape != (k,):
            raise ValueError(f"expected {k} weights, got {w.size}")
        if np.any(w < 0) or np.any(w > 1):
            raise ValueError("relative brightnesses must lie in [0, 1]")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"relative brightnesses must sum to 1 (got {w.sum()!r})")
        if np.ndim(sigma) != 0:
            raise ValueError("only isotropic PSFs are supported: sigma must be a scalar")
        sigma = float(sigma)
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        if int(photons) != photons or photons < 1:
            raise ValueError("photons must be a positive integer")
        pos.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "photons", int(photons))
        object.__setattr__(self, "dim", pos.shape[1])

    @classmethod
    def pair_1d(cls, separation, delta=0.0, sigma=1.0, photons=1, center=0.0):
        """Two 1D sources at ``center -/+ separation/2``, brightnesses (1 +/- delta)/2."""
        if not abs(delta) < 1:
            raise ValueError("|delta| must be < 1")
        pos = [center - separation / 2, center + separation / 2]
        return cls(pos, [(1 + delta) / 2, (1 - delta) / 2], sigma, photons)

    @property
    def n_sources(self):
        return self.positions.shape[0]

    @property
    def n_params(self):
        return self.positions.size

    @property
    def theta(self):
        return self.positions.ravel().copy()

    @property
    def labels(self):
        return param_labels(self.n_sources, self.dim)

    @property
    def dark_sources(self):
        """Indices of zero-brightness sources; they make the cofluorescent FIM singular."""
        return tuple(int(i) for i in np.flatnonzero(self.weights == 0))

    def with_theta(self, theta):
        return SourceModel(np.reshape(theta, self.positions.shape), self.weights,
                           self.sigma, self.photons)

    def box(self, half_width=8.0):
        lo = self.positions.min(axis=0) - half_width * self.sigma
        hi = self.positions.max(axis=0) + half_width * self.sigma
        return list(zip(lo, hi))


@dataclass(frozen=True)
class Detection:
    coordinates: tuple
    window: object = MIXED

    def __post_init__(self):
        w = self.window
        if w != MIXED and not (isinstance(w, (int, np.integer)) and w >= 1):
            raise ValueError("window must be a 1-based source index or 'mixed'")


def param_labels(n_sources, dim):
    axes = "xy"[:dim]
    return tuple(f"{a}{k + 1}" for k in range(n_sources) for a in axes)


def _as_points(r, dim):
    r = np.asarray(r, dtype=float)
    if dim == 1:
        if r.ndim == 2 and r.shape[1] == 1:
            return r, False
        if r.ndim > 1:
            raise ValueError("1D positions must be scalars")
        return r.reshape(-1, 1), r.ndim == 0
    if r.ndim == 1:
        if r.shape != (2,):
            raise ValueError("2D positions must have two coordinates")
        return r[None, :], True
    if r.ndim != 2 or r.shape[1] != 2:
        raise ValueError("2D positions must have two coordinates")
    return r, False


def _log_single(pts, rbar, sigma):
    d2 = ((pts - rbar) ** 2).sum(axis=-1)
    dim = pts.shape[-1]
    return -0.5 * dim * np.log(2 * np.pi * sigma**2) - d2 / (2 * sigma**2)


def single_source_density(r, rbar, sigma, dim=None):
    """psi^2(r - rbar), the PSF of one source (product over axes in 2D)."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    rbar = np.atleast_1d(np.asarray(rbar, dtype=float))
    if dim is None:
        dim = rbar.size
    if rbar.size != dim:
        raise ValueError(f"source position has {rbar.size} coordinates, expected {dim}")
    pts, scalar = _as_points(r, dim)
    out = np.exp(_log_single(pts, rbar, sigma))
    return out[0] if scalar else out


def log_components(r, model):
    """log(mu_k) + log p_k(r) for every source, shape (n, K)."""
    pts, _ = _as_points(r, model.dim)
    logp = _log_single(pts[:, None, :], model.positions[None, :, :], model.sigma)
    with np.errstate(divide="ignore"):
        return logp + np.log(model.weights)[None, :]


def log_mixture_density(r, model):
    pts, scalar = _as_points(r, model.dim)
    out = logsumexp(log_components(pts, model), axis=1)
    return out[0] if scalar else out


def mixture_density(r, model):
    """sum_k mu_k p_k(r): density of a photon emitted by all sources at once."""
    pts, scalar = _as_points(r, model.dim)
    comps = np.exp(log_components(pts, model))
    out = comps.sum(axis=1)
    return out[0] if scalar else out


def responsibilities(r, model):
    """Posterior source probabilities mu_k p_k / p, shape (n, K)."""
    lc = log_components(r, model)
    return np.exp(lc - logsumexp(lc, axis=1, keepdims=True))


def log_density_gradient(r, model):
    """Score d ln p(r) / d theta for the mixture density, shape (M,) or (n, M)."""
    pts, scalar = _as_points(r, model.dim)
    w = responsibilities(pts, model)
    diff = pts[:, None, :] - model.positions[None, :, :]
    g = (w[:, :, None] * diff / model.sigma**2).reshape(len(pts), -1)
    return g[0] if scalar else g


def mixture_density_gradient(r, model):
    """d p(r) / d theta = sum_k mu_k p_k (r - r_k) / sigma^2, shape (n, M)."""
    pts, _ = _as_points(r, model.dim)
    comps = np.exp(log_components(pts, model))
    diff = pts[:, None, :] - model.positions[None, :, :]
    return (comps[:, :, None] * diff / model.sigma**2).reshape(len(pts), -1)


class GaussianPSF:
    """Isotropic Gaussian amplitude psi(u) in ``dim`` dimensions."""

    def __init__(self, sigma=1.0, dim=2):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)
        self.dim = int(dim)
        self.width = self.sigma

    def amplitude(self, u):
        u = np.asarray(u, dtype=float).reshape(-1, self.dim)
        return np.prod(psf_amplitude(u, self.sigma), axis=1)

    def amplitude_grad(self, u):
        """Gradient of psi with respect to the offset u, shape (n, dim)."""
        u = np.asarray(u, dtype=float).reshape(-1, self.dim)
        return -u / (2 * self.sigma**2) * self.amplitude(u)[:, None]


class AnisotropicGaussianPSF:
    """Axis-aligned Gaussian amplitude with a different width per axis.

    Not rotation invariant; used as a counterexample for the invariance checks.
    """

    def __init__(self, sigmas):
        self.sigmas = np.asarray(sigmas, dtype=float)
        if np.any(self.sigmas <= 0):
            raise ValueError("all widths must be positive")
        self.dim = self.sigmas.size
        self.width = float(self.sigmas.max())

    def amplitude(self, u):
        u = np.asarray(u, dtype=float).reshape(-1, self.dim)
        return np.prod(psf_amplitude(u, self.sigmas[None, :]), axis=1)

    def amplitude_grad(self, u):
        u = np.asarray(u, dtype=float).reshape(-1, self.dim)
        return -u / (2 * self.sigmas**2) * self.amplitude(u)[:, None]
