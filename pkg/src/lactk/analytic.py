"""Filtered back-projection for parallel and equiangular fan geometries.

Besides serving as the baseline reconstructor, the linear FBP map is the
surrogate inverse Radon transform used inside the merge layer and the TV
u-step, so its exact adjoint is exposed as well (`fbp_adjoint_values`).

The back-projection step interpolates linearly in the detector coordinate;
bins outside the detector array contribute zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .geometry import FanGeometry, ParallelGeometry
from .projector import Geometry, Image, Sinogram


@dataclass(frozen=True)
class FilterSpec:
    """Ramp filter selection.

    kind : {"ram-lak", "hann"}
        Plain band-limited ramp, or ramp shaped by a Hann window.
    cutoff : float
        Band limit as a fraction of the Nyquist frequency, in (0, 1].
    """

    kind: str = "ram-lak"
    cutoff: float = 1.0

    def __post_init__(self):
        if self.kind not in ("ram-lak", "hann"):
            raise InvalidArgumentError(f"unknown filter kind {self.kind!r}")
        if not (0.0 < self.cutoff <= 1.0):
            raise InvalidArgumentError(f"cutoff must be in (0, 1], got {self.cutoff}")


RAM_LAK = FilterSpec()


def _ramp_response(n: int, filt: FilterSpec) -> np.ndarray:
    """|f| response (cycles/sample) for an rfft of length n, windowed."""
    f = np.arange(n // 2 + 1, dtype=np.float64) / n
    h = f.copy()
    limit = 0.5 * filt.cutoff
    if filt.kind == "hann":
        with np.errstate(invalid="ignore"):
            h *= 0.5 + 0.5 * np.cos(np.pi * f / limit)
    h[f > limit] = 0.0
    return h


def apply_ramp(row: np.ndarray, filt: FilterSpec = RAM_LAK) -> np.ndarray:
    """Circularly ramp-filter a detector row at its own length.

    The frequency response is |f| (Ram-Lak) or |f| * Hann up to the cutoff
    and 0 beyond; the DC gain is exactly 0.
    """
    row = np.asarray(row, dtype=np.float64)
    n = row.shape[-1]
    return np.fft.irfft(np.fft.rfft(row) * _ramp_response(n, filt), n=n)


def _filter_rows(rows: np.ndarray, filt: FilterSpec, spacing: float) -> np.ndarray:
    """Zero-pad rows to the next power of two >= 2n, ramp-filter, crop.

    The 1/spacing factor converts the per-sample response to physical
    frequency units.
    """
    n = rows.shape[-1]
    size = 1
    while size < 2 * n:
        size *= 2
    h = _ramp_response(size, filt)
    q = np.fft.irfft(np.fft.rfft(rows, n=size) * h, n=size)[..., :n]
    return q / spacing


def _pixel_centers(geom: Geometry) -> tuple[np.ndarray, np.ndarray]:
    g = geom.grid
    xs = (np.arange(g.width, dtype=np.float64) - (g.width - 1) / 2.0) * g.pixel_size
    ys = (np.arange(g.height, dtype=np.float64) - (g.height - 1) / 2.0) * g.pixel_size
    return np.meshgrid(xs, ys)


def _bp_parallel(q: np.ndarray, geom: ParallelGeometry, adjoint: bool,
                 img: np.ndarray | None = None) -> np.ndarray:
    """Pixel-driven back-projection (or its exact transpose)."""
    xg, yg = _pixel_centers(geom)
    n_det = geom.n_detectors
    c0 = geom.detector_center - (n_det - 1) / 2.0 * geom.detector_spacing
    if not adjoint:
        out = np.zeros(geom.grid.shape, dtype=np.float64)
    else:
        out = np.zeros(geom.sino_shape, dtype=np.float64)
    for m, theta in enumerate(geom.angles):
        t = xg * np.cos(theta) + yg * np.sin(theta)
        f = (t - c0) / geom.detector_spacing
        i0 = np.floor(f).astype(np.int64)
        w = f - i0
        m0 = (i0 >= 0) & (i0 < n_det)
        m1 = (i0 + 1 >= 0) & (i0 + 1 < n_det)
        if not adjoint:
            row = q[m]
            out += np.where(m0, row[np.clip(i0, 0, n_det - 1)] * (1.0 - w), 0.0)
            out += np.where(m1, row[np.clip(i0 + 1, 0, n_det - 1)] * w, 0.0)
        else:
            v0 = (img * (1.0 - w))[m0]
            v1 = (img * w)[m1]
            out[m] += np.bincount(i0[m0], weights=v0, minlength=n_det)
            out[m] += np.bincount(i0[m1] + 1, weights=v1, minlength=n_det)
    return out


def _bp_fan(q: np.ndarray, geom: FanGeometry, adjoint: bool,
            img: np.ndarray | None = None) -> np.ndarray:
    """Pixel-driven fan back-projection with 1/L^2 weighting (or transpose)."""
    xg, yg = _pixel_centers(geom)
    pos = geom.detector_angular_positions
    n_det = pos.size
    step = pos[1] - pos[0] if n_det > 1 else 1.0
    if not adjoint:
        out = np.zeros(geom.grid.shape, dtype=np.float64)
    else:
        out = np.zeros(geom.sino_shape, dtype=np.float64)
    for m, beta in enumerate(geom.angles):
        sx = geom.source_radius * np.cos(beta)
        sy = geom.source_radius * np.sin(beta)
        vx = xg - sx
        vy = yg - sy
        l2 = vx * vx + vy * vy
        gamma = np.arctan2(-vy, -vx) - beta
        gamma = (gamma + np.pi) % (2 * np.pi) - np.pi
        f = (gamma - pos[0]) / step
        i0 = np.floor(f).astype(np.int64)
        w = f - i0
        m0 = (i0 >= 0) & (i0 < n_det)
        m1 = (i0 + 1 >= 0) & (i0 + 1 < n_det)
        if not adjoint:
            row = q[m]
            val = np.where(m0, row[np.clip(i0, 0, n_det - 1)] * (1.0 - w), 0.0)
            val += np.where(m1, row[np.clip(i0 + 1, 0, n_det - 1)] * w, 0.0)
            out += val / l2
        else:
            src = img / l2
            v0 = (src * (1.0 - w))[m0]
            v1 = (src * w)[m1]
            out[m] += np.bincount(i0[m0], weights=v0, minlength=n_det)
            out[m] += np.bincount(i0[m1] + 1, weights=v1, minlength=n_det)
    return out


def fbp_values(sino_values: np.ndarray, geom: Geometry,
               filt: FilterSpec = RAM_LAK) -> np.ndarray:
    """Array-level FBP for either geometry (the hot path)."""
    s = np.asarray(sino_values, dtype=np.float64)
    if s.shape != geom.sino_shape:
        raise InvalidArgumentError(
            f"sinogram shape {s.shape} does not match geometry {geom.sino_shape}"
        )
    if isinstance(geom, ParallelGeometry):
        q = _filter_rows(s, filt, geom.detector_spacing)
        out = _bp_parallel(q, geom, adjoint=False) * (np.pi / geom.n_angles)
    else:
        pos = geom.detector_angular_positions
        step = pos[1] - pos[0] if pos.size > 1 else 1.0
        pre = s * (geom.source_radius * np.cos(pos))[None, :]
        q = 0.5 * _filter_rows(pre, filt, step)
        out = _bp_fan(q, geom, adjoint=False) * (2 * np.pi / geom.n_angles)
    return out.astype(sino_values.dtype, copy=False)


def fbp_adjoint_values(img_values: np.ndarray, geom: Geometry,
                       filt: FilterSpec = RAM_LAK) -> np.ndarray:
    """Exact adjoint of the linear map `fbp_values(., geom, filt)`."""
    x = np.asarray(img_values, dtype=np.float64)
    if x.shape != geom.grid.shape:
        raise InvalidArgumentError(
            f"image shape {x.shape} does not match grid {geom.grid.shape}"
        )
    if isinstance(geom, ParallelGeometry):
        bt = _bp_parallel(None, geom, adjoint=True, img=x)
        out = _filter_rows(bt, filt, geom.detector_spacing) * (np.pi / geom.n_angles)
    else:
        pos = geom.detector_angular_positions
        step = pos[1] - pos[0] if pos.size > 1 else 1.0
        bt = _bp_fan(None, geom, adjoint=True, img=x)
        out = 0.5 * _filter_rows(bt, filt, step)
        out *= (geom.source_radius * np.cos(pos))[None, :]
        out *= 2 * np.pi / geom.n_angles
    return out.astype(img_values.dtype, copy=False)


def fbp(sino: Sinogram, geom: ParallelGeometry, filt: FilterSpec = RAM_LAK) -> Image:
    """Parallel-beam FBP: ramp-filter each view, back-project with angular
    weight pi/n_angles."""
    if not isinstance(geom, ParallelGeometry):
        raise InvalidArgumentError("fbp expects a parallel geometry; use fbp_fan")
    if sino.geometry != geom:
        raise InvalidArgumentError("sinogram geometry does not match")
    return Image(grid=geom.grid, values=fbp_values(sino.values, geom, filt))


def fbp_fan(sino: Sinogram, geom: FanGeometry, filt: FilterSpec = RAM_LAK) -> Image:
    """Equiangular fan FBP: cosine pre-weight, ramp filter, back-project
    with inverse-square source-to-pixel distance weight."""
    if not isinstance(geom, FanGeometry):
        raise InvalidArgumentError("fbp_fan expects a fan geometry")
    if sino.geometry != geom:
        raise InvalidArgumentError("sinogram geometry does not match")
    return Image(grid=geom.grid, values=fbp_values(sino.values, geom, filt))


def reconstruct_padded(lim_values: np.ndarray, geom: Geometry, sel,
                       filt: FilterSpec = RAM_LAK) -> np.ndarray:
    """R^{-1} S* of a limited sinogram: zero-pad missing views, then run
    full-geometry FBP.  This is the initial-guess reconstructor."""
    from .projector import pad_dual_values

    return fbp_values(pad_dual_values(lim_values, sel), geom, filt)
