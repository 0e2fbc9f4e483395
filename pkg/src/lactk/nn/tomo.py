"""Tomography operators as differentiable single-channel batch layers.

Each layer applies the corresponding linear operator per batch element and
registers its exact adjoint as the backward pass: projection pairs with
back-projection, FBP with its transposed filter-then-spread composition,
view restriction with zero-padding and vice versa.
"""

from __future__ import annotations

import numpy as np

from ..analytic import RAM_LAK, FilterSpec, fbp_adjoint_values, fbp_values
from ..errors import InvalidArgumentError
from ..geometry import ViewSelection
from ..projector import Geometry, backproject_values, project_values
from .tensor import Tensor, accumulate, from_op


def _check_nhwc1(x: Tensor, spatial: tuple[int, int], what: str) -> None:
    v = x.values
    if v.ndim != 4 or v.shape[3] != 1 or v.shape[1:3] != spatial:
        raise InvalidArgumentError(
            f"{what}: expected shape (n, {spatial[0]}, {spatial[1]}, 1), got {v.shape}"
        )


def project_layer(x: Tensor, geom: Geometry) -> Tensor:
    """Forward projection of an image batch; backward is back-projection."""
    _check_nhwc1(x, geom.grid.shape, "project_layer")
    v = x.values
    out = np.empty((v.shape[0],) + geom.sino_shape + (1,), dtype=v.dtype)
    for i in range(v.shape[0]):
        out[i, :, :, 0] = project_values(v[i, :, :, 0], geom)

    def bw(g):
        dx = np.empty_like(v)
        for i in range(v.shape[0]):
            dx[i, :, :, 0] = backproject_values(g[i, :, :, 0], geom)
        accumulate(x, dx)

    return from_op(out, (x,), bw)


def fbp_layer(x: Tensor, geom: Geometry, filt: FilterSpec = RAM_LAK) -> Tensor:
    """Filtered back-projection of a sinogram batch; backward applies the
    exact adjoint of the linear FBP map."""
    _check_nhwc1(x, geom.sino_shape, "fbp_layer")
    v = x.values
    out = np.empty((v.shape[0],) + geom.grid.shape + (1,), dtype=v.dtype)
    for i in range(v.shape[0]):
        out[i, :, :, 0] = fbp_values(v[i, :, :, 0], geom, filt)

    def bw(g):
        dx = np.empty_like(v)
        for i in range(v.shape[0]):
            dx[i, :, :, 0] = fbp_adjoint_values(g[i, :, :, 0], geom, filt)
        accumulate(x, dx)

    return from_op(out, (x,), bw)


def restrict_layer(x: Tensor, sel: ViewSelection) -> Tensor:
    """Keep the selected sinogram rows; backward zero-pads them back."""
    v = x.values
    if v.ndim != 4 or v.shape[1] != sel.n_full_views:
        raise InvalidArgumentError(
            f"restrict_layer: expected {sel.n_full_views} views, got shape {v.shape}"
        )
    idx = sel.as_array()
    out = np.ascontiguousarray(v[:, idx])

    def bw(g):
        full = np.zeros_like(v)
        full[:, idx] = g
        accumulate(x, full)

    return from_op(out, (x,), bw)


def pad_layer(x: Tensor, sel: ViewSelection) -> Tensor:
    """Zero-pad selected rows to the full view set; backward restricts."""
    v = x.values
    if v.ndim != 4 or v.shape[1] != sel.n_kept:
        raise InvalidArgumentError(
            f"pad_layer: expected {sel.n_kept} views, got shape {v.shape}"
        )
    idx = sel.as_array()
    out = np.zeros((v.shape[0], sel.n_full_views) + v.shape[2:], dtype=v.dtype)
    out[:, idx] = v

    def bw(g):
        accumulate(x, np.ascontiguousarray(g[:, idx]))

    return from_op(out, (x,), bw)
