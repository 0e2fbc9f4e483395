import numpy as np
import pytest

from lactk.errors import InvalidArgumentError
from lactk.geometry import (
    FanGeometry,
    ImageGrid,
    ParallelGeometry,
    ViewSelection,
    make_fan,
    make_limited,
    make_parallel,
)


def test_make_parallel_standard():
    geom = make_parallel(ImageGrid(128, 128), 180, 185)
    assert np.allclose(geom.angles, np.pi / 180 * np.arange(180))
    coords = geom.detector_coords()
    assert coords[0] == -92 and coords[-1] == 92
    assert geom.detector_spacing == 1.0


def test_make_parallel_paper_scale_shape():
    geom = make_parallel(ImageGrid(512, 512), 180, 725)
    assert geom.sino_shape == (180, 725)
    coords = geom.detector_coords()
    assert coords[0] == -362 and coords[-1] == 362


def test_make_parallel_degenerate_single_ray():
    geom = make_parallel(ImageGrid(1, 1), 1, 1)
    assert geom.sino_shape == (1, 1)
    assert geom.detector_coords()[0] == 0.0


def test_make_parallel_rejects_zero_counts():
    with pytest.raises(InvalidArgumentError):
        make_parallel(ImageGrid(8, 8), 0, 5)
    with pytest.raises(InvalidArgumentError):
        make_parallel(ImageGrid(8, 8), 5, 0)


def test_make_fan_paper_configuration():
    geom = make_fan(ImageGrid(256, 256), 360, 600.0, np.deg2rad(18), np.deg2rad(0.05))
    assert geom.n_detectors == 721
    assert geom.sino_shape == (360, 721)
    pos = geom.detector_angular_positions
    assert pos[0] == -geom.fan_half_angle and pos[-1] == geom.fan_half_angle
    assert np.allclose(geom.angles, 2 * np.pi / 360 * np.arange(360))


def test_make_fan_small_grid_arithmetic():
    geom = make_fan(ImageGrid(64, 64), 8, 600.0, np.deg2rad(18), np.deg2rad(9))
    assert geom.n_detectors == 5
    assert geom.n_angles == 8


def test_make_fan_source_inside_object():
    with pytest.raises(InvalidArgumentError):
        make_fan(ImageGrid(64, 64), 360, 40.0, np.deg2rad(18), np.deg2rad(0.05))


def test_make_limited_prefixes():
    sel = make_limited(180, 150)
    assert sel.selected == tuple(range(150))
    sel = make_limited(360, 150)
    assert sel.n_full_views == 360 and sel.n_kept == 150
    sel = make_limited(10, 10)
    assert sel.selected == tuple(range(10))


def test_make_limited_rejects_bad_counts():
    with pytest.raises(InvalidArgumentError):
        make_limited(10, 0)
    with pytest.raises(InvalidArgumentError):
        make_limited(10, 11)


def test_angles_strictly_increasing_enforced():
    with pytest.raises(InvalidArgumentError):
        ParallelGeometry(grid=ImageGrid(8, 8), angles=np.array([0.3, 0.2]), n_detectors=5)
    with pytest.raises(InvalidArgumentError):
        FanGeometry(
            grid=ImageGrid(8, 8),
            angles=np.array([0.0, 0.0]),
            source_radius=60.0,
            detector_angular_positions=np.array([-0.1, 0.0, 0.1]),
            fan_half_angle=0.1,
        )


def test_regeneration_is_bit_identical():
    a = make_parallel(ImageGrid(64, 64), 90, 93)
    b = make_parallel(ImageGrid(64, 64), 90, 93)
    assert np.array_equal(a.angles, b.angles)
    f1 = make_fan(ImageGrid(32, 32), 40, 100.0, 0.3, 0.01)
    f2 = make_fan(ImageGrid(32, 32), 40, 100.0, 0.3, 0.01)
    assert np.array_equal(f1.angles, f2.angles)
    assert np.array_equal(f1.detector_angular_positions, f2.detector_angular_positions)


def test_view_selection_validation():
    with pytest.raises(InvalidArgumentError):
        ViewSelection(n_full_views=5, selected=())
    with pytest.raises(InvalidArgumentError):
        ViewSelection(n_full_views=5, selected=(5,))
    with pytest.raises(InvalidArgumentError):
        ViewSelection(n_full_views=5, selected=(1, 1))
    sparse = ViewSelection(n_full_views=10, selected=(0, 3, 7))
    assert sparse.n_kept == 3


def test_grid_validation():
    with pytest.raises(InvalidArgumentError):
        ImageGrid(0, 4)
    with pytest.raises(InvalidArgumentError):
        ImageGrid(4, 4, pixel_size=0.0)
