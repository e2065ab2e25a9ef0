"""Quantum Fisher information for single-photon image-plane states."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fim import SymMatrix
from .model import param_labels
from .quadrature import QuadratureSpec, integrate_box


def _check(sigma, delta):
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if not abs(delta) < 1:
        raise ValueError("|delta| must be < 1")


def qfim_blinking_1d(photons, sigma, delta):
    """(N / 2 sigma^2) diag(1 + delta, 1 - delta); equal to the classical blinking FIM."""
    _check(sigma, delta)
    h0 = photons / (2 * sigma**2)
    return SymMatrix(np.diag([h0 * (1 + delta), h0 * (1 - delta)]), ("x1", "x2"))


def beta(separation, sigma, delta):
    s2 = np.asarray(separation, dtype=float) ** 2
    return (1 - delta**2) * s2 * np.exp(-s2 / (4 * sigma**2)) / (8 * sigma**2)


def qfim_cofluorescent_1d(photons, sigma, delta, separation):
    """QFIM for two simultaneously emitting 1D sources with known brightnesses."""
    _check(sigma, delta)
    b = float(beta(separation, sigma, delta))
    h0 = photons / (2 * sigma**2)
    Q = h0 * np.array([[1 + delta - b, -b], [-b, 1 - delta - b]])
    return SymMatrix(Q, ("x1", "x2"))


@dataclass
class QfimClosedForm:
    matrix: SymMatrix
    beta: float
    delta: float


def qfim_closed_form(photons, sigma, delta, separation):
    return QfimClosedForm(qfim_cofluorescent_1d(photons, sigma, delta, separation),
                          float(beta(separation, sigma, delta)), delta)


def _overlaps(psf, rbar, quad):
    """Norm, J_ij = <d_i psi|d_j psi> and v_i = <psi|d_i psi> by quadrature.

    Derivatives are with respect to the source position, d/d rbar = -d/du.
    """
    rbar = np.atleast_1d(np.asarray(rbar, dtype=float))
    dim = psf.dim
    if rbar.size != dim:
        raise ValueError(f"source position must have {dim} coordinates")

    def integrand(X):
        u = X - rbar
        a = psf.amplitude(u)
        da = -psf.amplitude_grad(u)
        out = np.empty((len(X), dim + 1, dim + 1))
        vec = np.concatenate([a[:, None], da], axis=1)
        out[:] = np.conj(vec)[:, :, None] * vec[:, None, :]
        return out

    box = [(c - quad.half_width * psf.width, c + quad.half_width * psf.width) for c in rbar]
    panels = [int(np.ceil(2 * quad.half_width))] * dim
    G = integrate_box(integrand, box, quad, panels).value
    return G[0, 0], G[1:, 1:], G[0, 1:]


def qfim_pure_state(psf, rbar, quad=QuadratureSpec()):
    """QFIM of the single-photon state |Psi> = int psi(r - rbar) |r> dr.

    Returns 4 (J - v v^T), which reduces to (1/sigma^2) I for an isotropic
    Gaussian amplitude.
    """
    norm, J, v = _overlaps(psf, rbar, quad)
    if abs(norm - 1) > 1e-6:
        raise ValueError(f"PSF amplitude is not square-normalized (norm {norm:.8g})")
    Q = 4 * (J - np.outer(np.conj(v), v))
    return SymMatrix(np.real(Q), param_labels(1, psf.dim) if psf.dim <= 2 else None,
                     check=False)


def compatibility_check(psf, rbar, quad=QuadratureSpec()):
    """Largest |Tr{[L_i, L_j] rho}| over parameter pairs of a pure single-source state.

    With L_i = 2 (|d_i Psi><Psi| + |Psi><d_i Psi|) the commutator average is
    4 (J_ij - J_ji + v_i conj(v_j) - v_j conj(v_i)), which vanishes for real
    amplitudes. A single parameter has nothing to commute with.
    """
    _, J, v = _overlaps(psf, rbar, quad)
    if J.shape[0] < 2:
        return 0.0
    resid = 4 * (J - J.T + np.outer(v, np.conj(v)) - np.outer(np.conj(v), v))
    return float(np.max(np.abs(resid)))
