"""Vectorized adaptive Gauss-Kronrod (G7/K15) quadrature.

Integrands take a batch of abscissae and return values with any trailing
shape, so a whole Fisher matrix is integrated in one pass. Boxes of
dimension > 1 are handled by nesting the 1D rule (tensor product).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# QUADPACK qk15 constants, nodes on [0, 1] mirrored to [-1, 1] below.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
_g = np.concatenate([_WG[:-1], _WG[::-1]])
GAUSS_WEIGHTS[1::2] = _g
del _g


class QuadratureError(ArithmeticError):
    """Adaptive subdivision hit the depth limit before meeting tolerance."""

    def __init__(self, message, achieved=None, requested=None):
        super().__init__(message)
        self.achieved = achieved
        self.requested = requested


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and integration-box settings for the adaptive rule.

    ``half_width`` is the margin, in PSF widths, added beyond the extreme
    source positions when a box is built around a model.
    """

    rtol: float = 1e-10
    atol: float = 1e-14
    half_width: float = 8.0
    max_depth: int = 40
    max_intervals: int = 100_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.half_width < 5:
            raise ValueError("half_width must be at least 5 PSF widths")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


@dataclass
class QuadResult:
    value: np.ndarray
    error: float
    intervals: int


def _norm(a):
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def integrate(f, a, b, spec=QuadratureSpec(), panels=1):
    """Integrate ``f`` over ``[a, b]``.

    ``f(x)`` receives a 1D array of abscissae and must return an array whose
    leading axis matches ``x``. ``panels`` sets the initial uniform split,
    which should resolve the narrowest feature of the integrand.
    """
    if not b > a:
        raise ValueError("integration interval must satisfy b > a")
    panels = max(int(panels), 1)
    edges = np.linspace(a, b, panels + 1)
    lefts, rights = edges[:-1], edges[1:]
    depth = np.zeros(panels, dtype=int)
    length = b - a

    done_left = []
    done_val = []
    done_err = []

    while True:
        centers = 0.5 * (lefts + rights)
        halves = 0.5 * (rights - lefts)
        x = (centers[:, None] + halves[:, None] * NODES[None, :]).ravel()
        fx = np.asarray(f(x), dtype=float)
        out_shape = fx.shape[1:]
        fx = fx.reshape(len(lefts), 15, -1)
        kron = np.einsum("j,ijk->ik", KRONROD_WEIGHTS, fx) * halves[:, None]
        gauss = np.einsum("j,ijk->ik", GAUSS_WEIGHTS, fx) * halves[:, None]
        err = np.max(np.abs(kron - gauss), axis=1)

        all_val = np.concatenate(done_val + [kron]) if done_val else kron
        all_err = np.concatenate(done_err + [err]) if done_err else err
        total = all_val.sum(axis=0)
        total_err = float(all_err.sum())
        tol = max(spec.atol, spec.rtol * _norm(total))
        if total_err <= tol:
            break

        # Each panel may carry error in proportion to its width.
        allowed = tol * (rights - lefts) / length
        bad = err > allowed
        if not bad.any():
            # Accumulated error from accepted panels; split the worst open ones.
            bad = err >= np.max(err)
        n_open = len(all_err) + int(bad.sum())
        if np.any(depth[bad] >= spec.max_depth) or n_open > spec.max_intervals:
            raise QuadratureError(
                f"quadrature did not converge (depth {spec.max_depth}, "
                f"{spec.max_intervals} intervals): "
                f"achieved {total_err:.3e}, requested {tol:.3e}",
                achieved=total_err, requested=tol)
        good = ~bad
        done_left.append(lefts[good])
        done_val.append(kron[good])
        done_err.append(err[good])
        mids = centers[bad]
        lefts = np.concatenate([lefts[bad], mids])
        rights = np.concatenate([mids, rights[bad]])
        depth = np.concatenate([depth[bad] + 1, depth[bad] + 1])

    # Sum in order of position so the result is independent of refinement order.
    all_left = np.concatenate(done_left + [lefts])
    order = np.argsort(all_left, kind="stable")
    value = all_val[order].sum(axis=0).reshape(out_shape)
    return QuadResult(value=value, error=total_err, intervals=len(order))


def integrate_box(f, box, spec=QuadratureSpec(), panels=None):
    """Integrate ``f(X)`` over a rectangular box by nested 1D rules.

    ``f`` receives points of shape ``(n, len(box))``. ``panels`` gives the
    initial split per axis (defaults to 1 each).
    """
    box = [tuple(map(float, lim)) for lim in box]
    if panels is None:
        panels = [1] * len(box)
    elif np.isscalar(panels):
        panels = [int(panels)] * len(box)
    if len(box) == 1:
        (a, b), = box
        return integrate(lambda x: f(x[:, None]), a, b, spec, panels[0])

    inner_box, (lo, hi) = box[:-1], box[-1]
    inner_panels = panels[:-1]
    errors = []

    def outer(t):
        m = t.shape[0]

        def inner(Y):
            n = Y.shape[0]
            X = np.concatenate([np.repeat(Y, m, axis=0), np.tile(t, n)[:, None]], axis=1)
            vals = np.asarray(f(X), dtype=float)
            return vals.reshape((n, m) + vals.shape[1:])

        res = integrate_box(inner, inner_box, spec, inner_panels)
        errors.append(res.error)
        return res.value

    res = integrate(outer, lo, hi, spec, panels[-1])
    return QuadResult(value=res.value, error=res.error + (hi - lo) * max(errors, default=0.0),
                      intervals=res.intervals)
