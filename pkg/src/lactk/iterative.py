"""Classical baselines: CGLS least squares and TV-regularized ADMM.

The TV solver alternates a gradient-descent image update (with the
filtered back-projection standing in for the normal-equation inverse),
anisotropic shrinkage of the gradient field, and a multiplier update,
stopping on a relative-change rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analytic import RAM_LAK, FilterSpec, fbp_values
from .errors import DivergedError, InvalidArgumentError
from .geometry import ViewSelection
from .projector import (
    Geometry,
    Image,
    LimitedSinogram,
    backproject_values,
    pad_dual_values,
    project_values,
    restrict_values,
)


@dataclass(frozen=True)
class TvParams:
    """TV-ADMM solver parameters (defaults: the parallel-beam setup)."""

    tv_weight: float = 100.0
    penalty: float = 0.1
    step_size: float = 0.1
    max_iters: int = 300
    rel_change_tol: float = 1e-4
    u_steps: int = 1  # gradient-descent updates per outer iteration

    def __post_init__(self):
        if min(self.tv_weight, self.penalty, self.step_size) <= 0 or self.max_iters < 1:
            raise InvalidArgumentError("TV parameters must be positive")
        if not (0 < self.rel_change_tol < 1):
            raise InvalidArgumentError("rel_change_tol must be in (0, 1)")
        if self.u_steps < 1:
            raise InvalidArgumentError("u_steps must be >= 1")


@dataclass(frozen=True)
class GradField:
    """Forward-difference field: x-differences and y-differences rasters."""

    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self):
        if self.dx.shape != self.dy.shape:
            raise InvalidArgumentError("gradient components must share a shape")


def grad(values: np.ndarray) -> GradField:
    """Forward differences with replicate (Neumann) boundary: the last
    column of x-differences and last row of y-differences are zero."""
    gx = np.zeros_like(values)
    gy = np.zeros_like(values)
    gx[:, :-1] = values[:, 1:] - values[:, :-1]
    gy[:-1, :] = values[1:, :] - values[:-1, :]
    return GradField(dx=gx, dy=gy)


def div(field: GradField) -> np.ndarray:
    """Exact negative adjoint of :func:`grad`."""
    px, py = field.dx, field.dy
    out = np.zeros_like(px)
    out[:, :-1] += px[:, :-1]
    out[:, 1:] -= px[:, :-1]
    out[:-1, :] += py[:-1, :]
    out[1:, :] -= py[:-1, :]
    return out


def shrink(field: GradField, threshold: float) -> GradField:
    """Componentwise soft threshold sign(x) * max(|x| - threshold, 0)."""
    if threshold < 0:
        raise InvalidArgumentError("shrink threshold must be >= 0")

    def soft(a):
        return np.sign(a) * np.maximum(np.abs(a) - threshold, 0.0)

    return GradField(dx=soft(field.dx), dy=soft(field.dy))


def _limited_op(geom: Geometry, sel: ViewSelection):
    def fwd(u):
        return restrict_values(project_values(u, geom), sel)

    def adj(y):
        return backproject_values(pad_dual_values(y, sel), geom)

    return fwd, adj


def cgls(
    g: LimitedSinogram,
    geom: Geometry,
    sel: ViewSelection,
    max_iters: int = 50,
    tol: float = 1e-10,
    return_history: bool = False,
):
    """Conjugate-gradient least squares for min_u ||S(Wu) - g||^2.

    Tracks the iterate with the smallest normal-equation residual
    ||W^T S^*(S W u - g)|| and returns it, so the accepted-residual
    sequence is non-increasing; stops once it falls below ``tol`` or after
    ``max_iters`` iterations.

    Returns the reconstructed Image (and the accepted-residual history
    when ``return_history`` is set).
    """
    if max_iters < 1:
        raise InvalidArgumentError("max_iters must be >= 1")
    fwd, adj = _limited_op(geom, sel)
    b = np.asarray(g.values, dtype=np.float64)
    x = np.zeros(geom.grid.shape, dtype=np.float64)
    r = b.copy()
    s = adj(r)
    p = s.copy()
    gamma = float(np.vdot(s, s))
    best = x.copy()
    best_ne = np.sqrt(gamma)
    history = [best_ne]
    for _ in range(max_iters):
        q = fwd(p)
        qq = float(np.vdot(q, q))
        if qq == 0.0:
            break
        alpha = gamma / qq
        x += alpha * p
        r -= alpha * q
        s = adj(r)
        gamma_new = float(np.vdot(s, s))
        ne = np.sqrt(gamma_new)
        if ne < best_ne:
            best_ne = ne
            best = x.copy()
        history.append(best_ne)
        if best_ne <= tol or gamma_new == 0.0:
            break
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    img = Image(grid=geom.grid, values=best)
    return (img, history) if return_history else img


def tv_admm(
    g: LimitedSinogram,
    geom: Geometry,
    sel: ViewSelection,
    params: TvParams = TvParams(),
    filt: FilterSpec = RAM_LAK,
) -> Image:
    """Total-variation reconstruction by ADMM with a gradient-descent
    image step.

    Per outer iteration: the image takes ``params.u_steps`` descent steps
    driven by the FBP of the zero-padded data residual plus the divergence
    coupling term, is clamped to >= 0, then the gradient field is
    soft-thresholded at tv_weight/penalty and the multiplier updated.
    Stops when ||u_new - u||^2 / ||u_new||^2 <= rel_change_tol or at
    max_iters.
    """
    b = np.asarray(g.values, dtype=np.float64)
    u = fbp_values(pad_dual_values(b, sel), geom, filt)
    np.maximum(u, 0.0, out=u)
    v = GradField(dx=np.zeros_like(u), dy=np.zeros_like(u))
    c = GradField(dx=np.zeros_like(u), dy=np.zeros_like(u))
    for k in range(params.max_iters):
        u_prev = u
        for _ in range(params.u_steps):
            resid = restrict_values(project_values(u, geom), sel) - b
            data_term = fbp_values(pad_dual_values(resid, sel), geom, filt)
            gu = grad(u)
            coupling = div(GradField(dx=gu.dx - v.dx + c.dx, dy=gu.dy - v.dy + c.dy))
            u = u - params.step_size * (data_term - params.penalty * coupling)
            np.maximum(u, 0.0, out=u)
        if not np.all(np.isfinite(u)):
            raise DivergedError(f"tv_admm diverged at iteration {k + 1}")
        gu = grad(u)
        v = shrink(GradField(dx=gu.dx + c.dx, dy=gu.dy + c.dy), params.tv_weight / params.penalty)
        c = GradField(dx=c.dx + gu.dx - v.dx, dy=c.dy + gu.dy - v.dy)
        delta = float(np.vdot(u - u_prev, u - u_prev))
        norm = float(np.vdot(u, u))
        if delta == 0.0 or (norm > 0.0 and delta / norm <= params.rel_change_tol):
            break
    return Image(grid=geom.grid, values=u)
