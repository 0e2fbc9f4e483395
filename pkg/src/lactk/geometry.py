"""Scan geometries: image grids, detector arrays, angle sets, view selection.

All lengths are in pixel units (pixel_size defaults to 1.0) and the image
is centered on the world origin.  Columns increase with +x and rows with
+y, so pixel (i, j) of a height x width raster has its center at

    x = (j - (width - 1) / 2) * pixel_size
    y = (i - (height - 1) / 2) * pixel_size

Geometry values are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class ImageGrid:
    """Square-pixel raster description.

    Parameters
    ----------
    width, height : int
        Raster size in pixels, each >= 1.
    pixel_size : float
        Edge length of a pixel, > 0.
    """

    width: int
    height: int
    pixel_size: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidArgumentError(f"grid size must be >= 1, got {self.width}x{self.height}")
        if not self.pixel_size > 0:
            raise InvalidArgumentError(f"pixel_size must be > 0, got {self.pixel_size}")

    @property
    def shape(self) -> tuple[int, int]:
        """(height, width) raster shape."""
        return (self.height, self.width)

    @property
    def circumradius(self) -> float:
        """Radius of the circle circumscribing the grid, in length units."""
        return 0.5 * math.hypot(self.width, self.height) * self.pixel_size


def _check_angles(angles: np.ndarray, upper: float, what: str) -> None:
    if angles.ndim != 1 or angles.size == 0:
        raise InvalidArgumentError(f"{what}: need a non-empty 1-D angle list")
    if np.any(np.diff(angles) <= 0):
        raise InvalidArgumentError(f"{what}: angles must be strictly increasing")
    if angles[0] < 0 or angles[-1] >= upper:
        raise InvalidArgumentError(f"{what}: angles must lie in [0, {upper:.6g})")


@dataclass(frozen=True)
class ParallelGeometry:
    """Parallel-beam scan: one flat detector row per view angle.

    ``angles`` are strictly increasing in [0, pi).  Detector cell k sits at
    signed coordinate ``detector_center + (k - (n_detectors-1)/2) * detector_spacing``
    along the axis perpendicular to the rays.  The detector span should
    cover the grid diagonal when the geometry is used for full
    reconstruction; shorter arrays are permitted for truncated tests.
    """

    grid: ImageGrid
    angles: np.ndarray
    n_detectors: int
    detector_spacing: float = 1.0
    detector_center: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "angles", np.asarray(self.angles, dtype=np.float64))
        self.angles.setflags(write=False)
        _check_angles(self.angles, np.pi, "parallel geometry")
        if self.n_detectors < 1:
            raise InvalidArgumentError("n_detectors must be >= 1")
        if not self.detector_spacing > 0:
            raise InvalidArgumentError("detector_spacing must be > 0")

    @property
    def n_angles(self) -> int:
        return self.angles.size

    @property
    def sino_shape(self) -> tuple[int, int]:
        return (self.n_angles, self.n_detectors)

    def detector_coords(self) -> np.ndarray:
        """Signed detector-cell center coordinates, shape (n_detectors,)."""
        k = np.arange(self.n_detectors, dtype=np.float64)
        return self.detector_center + (k - (self.n_detectors - 1) / 2.0) * self.detector_spacing


@dataclass(frozen=True)
class FanGeometry:
    """Equiangular fan-beam scan: point source on a circle of radius
    ``source_radius`` around the grid center, detector cells at angular
    offsets ``detector_angular_positions`` (radians, symmetric about 0)
    from the central ray.
    """

    grid: ImageGrid
    angles: np.ndarray
    source_radius: float
    detector_angular_positions: np.ndarray
    fan_half_angle: float

    def __post_init__(self):
        object.__setattr__(self, "angles", np.asarray(self.angles, dtype=np.float64))
        object.__setattr__(
            self,
            "detector_angular_positions",
            np.asarray(self.detector_angular_positions, dtype=np.float64),
        )
        self.angles.setflags(write=False)
        self.detector_angular_positions.setflags(write=False)
        _check_angles(self.angles, 2 * np.pi, "fan geometry")
        if not self.source_radius > self.grid.circumradius:
            raise InvalidArgumentError(
                f"source radius {self.source_radius} is inside the object "
                f"(grid circumradius {self.grid.circumradius:.6g})"
            )
        pos = self.detector_angular_positions
        if pos.ndim != 1 or pos.size == 0:
            raise InvalidArgumentError("need a non-empty detector position list")
        if np.any(np.diff(pos) <= 0):
            raise InvalidArgumentError("detector positions must be strictly increasing")
        if abs(pos[0] + pos[-1]) > 1e-9 or pos[-1] > self.fan_half_angle + 1e-9:
            raise InvalidArgumentError(
                "detector positions must be symmetric about 0 and within +-fan_half_angle"
            )

    @property
    def n_angles(self) -> int:
        return self.angles.size

    @property
    def n_detectors(self) -> int:
        return self.detector_angular_positions.size

    @property
    def sino_shape(self) -> tuple[int, int]:
        return (self.n_angles, self.n_detectors)


@dataclass(frozen=True)
class ViewSelection:
    """Subset of the full view set kept by a limited-angle acquisition.

    ``selected`` is an ordered index tuple into [0, n_full_views); the
    default acquisition pattern keeps a contiguous prefix of the views, but
    arbitrary (e.g. sparse) index sets are representable.
    """

    n_full_views: int
    selected: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "selected", tuple(int(i) for i in self.selected))
        if self.n_full_views < 1:
            raise InvalidArgumentError("n_full_views must be >= 1")
        if len(self.selected) == 0:
            raise InvalidArgumentError("view selection must be non-empty")
        if any(i < 0 or i >= self.n_full_views for i in self.selected):
            raise InvalidArgumentError(
                f"selected views must lie in [0, {self.n_full_views})"
            )
        if len(set(self.selected)) != len(self.selected):
            raise InvalidArgumentError("selected views must be distinct")

    @property
    def n_kept(self) -> int:
        return len(self.selected)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.selected, dtype=np.int64)


def make_parallel(grid: ImageGrid, n_angles: int, n_detectors: int) -> ParallelGeometry:
    """Uniform parallel-beam geometry: angles k*pi/n_angles, unit-spacing
    detectors centered on the origin.

    Parameters
    ----------
    grid : ImageGrid
    n_angles : int
        Number of views over [0, pi), > 0.
    n_detectors : int
        Detector cells per view, > 0.
    """
    if n_angles < 1 or n_detectors < 1:
        raise InvalidArgumentError("n_angles and n_detectors must be positive")
    angles = np.arange(n_angles, dtype=np.float64) * (np.pi / n_angles)
    return ParallelGeometry(grid=grid, angles=angles, n_detectors=n_detectors)


def make_fan(
    grid: ImageGrid,
    n_angles: int,
    source_radius: float,
    fan_half_angle: float,
    det_step: float,
) -> FanGeometry:
    """Equiangular fan-beam geometry with views uniform over [0, 2*pi).

    Detector positions are ``-fan_half_angle + k*det_step`` up to and
    including ``+fan_half_angle``.

    Parameters
    ----------
    grid : ImageGrid
    n_angles : int
        Number of views over [0, 2*pi), > 0.
    source_radius : float
        Source orbit radius; must exceed the grid circumradius.
    fan_half_angle : float
        Half fan opening, radians.
    det_step : float
        Angular detector pitch, radians.
    """
    if n_angles < 1:
        raise InvalidArgumentError("n_angles must be positive")
    if not (fan_half_angle > 0 and det_step > 0):
        raise InvalidArgumentError("fan_half_angle and det_step must be positive")
    n_det = int(round(2.0 * fan_half_angle / det_step)) + 1
    k = np.arange(n_det, dtype=np.float64)
    positions = -fan_half_angle + k * det_step
    # guard against rounding drift: enforce exact symmetry of the endpoints
    positions[-1] = fan_half_angle
    angles = np.arange(n_angles, dtype=np.float64) * (2 * np.pi / n_angles)
    return FanGeometry(
        grid=grid,
        angles=angles,
        source_radius=source_radius,
        detector_angular_positions=positions,
        fan_half_angle=fan_half_angle,
    )


def make_limited(n_full: int, n_kept: int) -> ViewSelection:
    """Keep the first ``n_kept`` of ``n_full`` views (contiguous prefix)."""
    if n_kept < 1 or n_kept > n_full:
        raise InvalidArgumentError(
            f"n_kept must satisfy 0 < n_kept <= n_full, got {n_kept}/{n_full}"
        )
    return ViewSelection(n_full_views=n_full, selected=tuple(range(n_kept)))
