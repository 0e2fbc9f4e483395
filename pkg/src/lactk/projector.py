"""Discrete forward operator W, adjoint W^T, view subsampling S and dual S*.

W is matrix-free: every sinogram bin is the exact line integral of the
image along the ray through that detector-cell center, computed by Siddon
traversal.  The adjoint runs the identical traversal in scatter mode, so
the adjoint identity holds to rounding error by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._siddon import siddon_adjoint, siddon_forward
from .errors import InvalidArgumentError
from .geometry import FanGeometry, ImageGrid, ParallelGeometry, ViewSelection

Geometry = ParallelGeometry | FanGeometry


@dataclass(frozen=True)
class Image:
    """2-D attenuation raster bound to its grid."""

    grid: ImageGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        object.__setattr__(self, "values", v)
        if v.shape != self.grid.shape:
            raise InvalidArgumentError(
                f"image shape {v.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("image contains non-finite values")


@dataclass(frozen=True)
class Sinogram:
    """Full-view measurement raster, rows ordered like geometry.angles."""

    geometry: Geometry
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        object.__setattr__(self, "values", v)
        if v.shape != self.geometry.sino_shape:
            raise InvalidArgumentError(
                f"sinogram shape {v.shape} does not match geometry {self.geometry.sino_shape}"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("sinogram contains non-finite values")


@dataclass(frozen=True)
class LimitedSinogram:
    """Row-restriction of a full sinogram to the selected views."""

    geometry: Geometry
    selection: ViewSelection
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        object.__setattr__(self, "values", v)
        if self.selection.n_full_views != self.geometry.n_angles:
            raise InvalidArgumentError("selection does not address this geometry's views")
        expected = (self.selection.n_kept, self.geometry.sino_shape[1])
        if v.shape != expected:
            raise InvalidArgumentError(
                f"limited sinogram shape {v.shape}, expected {expected}"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("sinogram contains non-finite values")


def _rays(geom: Geometry) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-bin ray origins and unit directions, flattened in row-major
    (angle, detector) order."""
    if isinstance(geom, ParallelGeometry):
        ct = np.cos(geom.angles)[:, None]
        st = np.sin(geom.angles)[:, None]
        t = geom.detector_coords()[None, :]
        shape = (geom.n_angles, geom.n_detectors)
        ox = np.ascontiguousarray(t * ct).ravel()
        oy = np.ascontiguousarray(t * st).ravel()
        dx = np.ascontiguousarray(np.broadcast_to(-st, shape)).ravel()
        dy = np.ascontiguousarray(np.broadcast_to(ct, shape)).ravel()
        return ox, oy, dx, dy
    beta = geom.angles[:, None]
    gamma = geom.detector_angular_positions[None, :]
    shape = (geom.n_angles, geom.n_detectors)
    sx = geom.source_radius * np.cos(beta)
    sy = geom.source_radius * np.sin(beta)
    ox = np.ascontiguousarray(np.broadcast_to(sx, shape)).ravel()
    oy = np.ascontiguousarray(np.broadcast_to(sy, shape)).ravel()
    dx = np.ascontiguousarray(-np.cos(beta + gamma)).ravel()
    dy = np.ascontiguousarray(-np.sin(beta + gamma)).ravel()
    return ox, oy, dx, dy


def project_values(img_values: np.ndarray, geom: Geometry) -> np.ndarray:
    """Array-level forward projection (the hot path used by layers/solvers)."""
    img64 = np.ascontiguousarray(img_values, dtype=np.float64)
    ox, oy, dx, dy = _rays(geom)
    out = np.empty(ox.size, dtype=np.float64)
    siddon_forward(img64, ox, oy, dx, dy, float(geom.grid.pixel_size), out)
    out = out.reshape(geom.sino_shape)
    return out.astype(img_values.dtype, copy=False)


def backproject_values(sino_values: np.ndarray, geom: Geometry) -> np.ndarray:
    """Array-level adjoint projection (exact transpose of project_values)."""
    sino64 = np.ascontiguousarray(sino_values, dtype=np.float64).ravel()
    ox, oy, dx, dy = _rays(geom)
    out = np.zeros(geom.grid.shape, dtype=np.float64)
    siddon_adjoint(sino64, ox, oy, dx, dy, float(geom.grid.pixel_size), out)
    return out.astype(sino_values.dtype, copy=False)


def project(img: Image, geom: Geometry) -> Sinogram:
    """Forward-project an image: W u.

    Each sinogram entry is the sum over pixels of (exact ray-pixel
    intersection length) * (pixel value); linear in the image.
    """
    if img.grid != geom.grid:
        raise InvalidArgumentError("image grid does not match geometry grid")
    return Sinogram(geometry=geom, values=project_values(img.values, geom))


def backproject(sino: Sinogram, geom: Geometry) -> Image:
    """Apply the exact adjoint W^T under the standard inner products."""
    if sino.geometry != geom:
        raise InvalidArgumentError("sinogram geometry does not match")
    return Image(grid=geom.grid, values=backproject_values(sino.values, geom))


def restrict_values(sino_values: np.ndarray, sel: ViewSelection) -> np.ndarray:
    if sino_values.shape[0] != sel.n_full_views:
        raise InvalidArgumentError(
            f"selection addresses {sel.n_full_views} views, sinogram has {sino_values.shape[0]}"
        )
    return sino_values[sel.as_array()]


def pad_dual_values(lim_values: np.ndarray, sel: ViewSelection) -> np.ndarray:
    if lim_values.shape[0] != sel.n_kept:
        raise InvalidArgumentError(
            f"selection keeps {sel.n_kept} views, limited sinogram has {lim_values.shape[0]}"
        )
    out = np.zeros((sel.n_full_views,) + lim_values.shape[1:], dtype=lim_values.dtype)
    out[sel.as_array()] = lim_values
    return out


def restrict(sino: Sinogram, sel: ViewSelection) -> LimitedSinogram:
    """Subsampling operator S: keep the selected rows, order preserved."""
    return LimitedSinogram(
        geometry=sino.geometry,
        selection=sel,
        values=restrict_values(sino.values, sel),
    )


def pad_dual(lim: LimitedSinogram) -> Sinogram:
    """Dual operator S*: selected rows copied back, all other rows zero."""
    return Sinogram(
        geometry=lim.geometry,
        values=pad_dual_values(lim.values, lim.selection),
    )
