import numpy as np
import pytest

from lactk.errors import InvalidArgumentError
from lactk.geometry import ImageGrid, ParallelGeometry, make_limited, make_parallel
from lactk.projector import (
    Image,
    LimitedSinogram,
    Sinogram,
    backproject,
    backproject_values,
    pad_dual,
    pad_dual_values,
    project,
    project_values,
    restrict,
    restrict_values,
)


def line_square_length(theta, t, cx, cy, half):
    """Analytic chord length of the line x cos(theta) + y sin(theta) = t
    through the square [cx-half, cx+half] x [cy-half, cy+half], by
    Liang-Barsky clipping.  Independent oracle for the traversal kernel."""
    ox, oy = t * np.cos(theta), t * np.sin(theta)
    dx, dy = -np.sin(theta), np.cos(theta)
    smin, smax = -np.inf, np.inf
    for o, d, lo, hi in ((ox, dx, cx - half, cx + half), (oy, dy, cy - half, cy + half)):
        if abs(d) < 1e-15:
            if o < lo or o > hi:
                return 0.0
        else:
            s1, s2 = (lo - o) / d, (hi - o) / d
            smin = max(smin, min(s1, s2))
            smax = min(smax, max(s1, s2))
    return max(0.0, smax - smin)


def oracle_sinogram(img, geom):
    out = np.zeros(geom.sino_shape)
    h, w = img.shape
    for m, theta in enumerate(geom.angles):
        for k, t in enumerate(geom.detector_coords()):
            total = 0.0
            for i in range(h):
                for j in range(w):
                    cx = (j - (w - 1) / 2) * geom.grid.pixel_size
                    cy = (i - (h - 1) / 2) * geom.grid.pixel_size
                    total += img[i, j] * line_square_length(
                        theta, t, cx, cy, geom.grid.pixel_size / 2
                    )
            out[m, k] = total
    return out


def test_center_pixel_rays():
    geom = ParallelGeometry(
        grid=ImageGrid(3, 3), angles=np.array([0.0, np.pi / 2]), n_detectors=3
    )
    img = np.zeros((3, 3))
    img[1, 1] = 1.0
    sino = project_values(img, geom)
    expected = np.array([[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]])
    assert np.allclose(sino, expected, atol=1e-12)


def test_matches_analytic_intersection_oracle():
    rng = np.random.default_rng(3)
    grid = ImageGrid(5, 4)
    geom = ParallelGeometry(
        grid=grid, angles=np.array([0.3, 1.1, 2.7]), n_detectors=7
    )
    img = rng.random(grid.shape)
    assert np.allclose(project_values(img, geom), oracle_sinogram(img, geom), atol=1e-10)


def test_zero_image_zero_sinogram():
    geom = make_parallel(ImageGrid(16, 16), 12, 23)
    assert np.all(project_values(np.zeros((16, 16)), geom) == 0.0)
    assert np.all(backproject_values(np.zeros(geom.sino_shape), geom) == 0.0)


def test_linearity_on_random_images(rng):
    geom = make_parallel(ImageGrid(16, 16), 20, 23)
    for _ in range(3):
        a, b = rng.random((16, 16)), rng.random((16, 16))
        lhs = project_values(2.5 * a - 1.5 * b, geom)
        rhs = 2.5 * project_values(a, geom) - 1.5 * project_values(b, geom)
        assert np.allclose(lhs, rhs, atol=1e-11)


def test_adjoint_identity(rng):
    geom = make_parallel(ImageGrid(16, 16), 24, 23)
    for _ in range(5):
        u = rng.standard_normal((16, 16))
        y = rng.standard_normal(geom.sino_shape)
        wu = project_values(u, geom)
        lhs = np.vdot(wu, y)
        rhs = np.vdot(u, backproject_values(y, geom))
        assert abs(lhs - rhs) <= 1e-12 * np.linalg.norm(wu) * np.linalg.norm(y)


def test_single_bin_backprojection_support():
    grid = ImageGrid(6, 6)
    geom = ParallelGeometry(grid=grid, angles=np.array([0.4]), n_detectors=9)
    sino = np.zeros(geom.sino_shape)
    sino[0, 5] = 1.0
    img = backproject_values(sino, geom)
    t = geom.detector_coords()[5]
    for i in range(6):
        for j in range(6):
            cx, cy = j - 2.5, i - 2.5
            length = line_square_length(0.4, t, cx, cy, 0.5)
            if length == 0.0:
                assert img[i, j] == 0.0
            else:
                assert np.isclose(img[i, j], length, atol=1e-12)


def test_nonnegative_image_projects_nonnegative(rng):
    geom = make_parallel(ImageGrid(16, 16), 18, 23)
    assert np.all(project_values(rng.random((16, 16)), geom) >= 0.0)


def test_ray_sum_bound(rng):
    grid = ImageGrid(16, 16)
    geom = make_parallel(grid, 18, 23)
    img = rng.random((16, 16))
    bound = np.hypot(16, 16) * img.max()
    assert project_values(img, geom).max() <= bound


def test_restrict_and_pad_examples(rng):
    geom = make_parallel(ImageGrid(8, 8), 180, 13)
    sel = make_limited(180, 150)
    full = rng.random(geom.sino_shape)
    lim = restrict_values(full, sel)
    assert lim.shape == (150, 13)
    assert np.array_equal(lim, full[:150])

    sel_all = make_limited(180, 180)
    assert np.array_equal(restrict_values(full, sel_all), full)

    padded = pad_dual_values(lim, sel)
    assert padded.shape == geom.sino_shape
    assert np.all(padded[150:] == 0.0)
    assert np.array_equal(padded[:150], lim)

    # restrict . pad_dual is the identity on limited sinograms (exact)
    assert np.array_equal(restrict_values(padded, sel), lim)
    # pad_dual . restrict is a row mask (exact)
    mask = np.zeros(geom.sino_shape)
    mask[:150] = 1.0
    assert np.array_equal(pad_dual_values(restrict_values(full, sel), sel), full * mask)


def test_restrict_pad_adjoint(rng):
    sel = make_limited(40, 25)
    y = rng.standard_normal((40, 9))
    z = rng.standard_normal((25, 9))
    assert np.vdot(restrict_values(y, sel), z) == pytest.approx(
        np.vdot(y, pad_dual_values(z, sel)), abs=1e-12
    )


def test_typed_wrappers_and_errors(rng):
    grid = ImageGrid(8, 8)
    geom = make_parallel(grid, 10, 13)
    other = make_parallel(ImageGrid(9, 9), 10, 13)
    img = Image(grid=grid, values=rng.random((8, 8)))
    with pytest.raises(InvalidArgumentError):
        project(img, other)
    sino = project(img, geom)
    assert isinstance(sino, Sinogram)
    rec = backproject(sino, geom)
    assert rec.values.shape == (8, 8)
    sel = make_limited(10, 6)
    lim = restrict(sino, sel)
    assert isinstance(lim, LimitedSinogram)
    assert np.array_equal(pad_dual(lim).values[:6], lim.values)
    with pytest.raises(InvalidArgumentError):
        Image(grid=grid, values=np.full((8, 8), np.nan))
    with pytest.raises(InvalidArgumentError):
        restrict_values(rng.random((9, 13)), sel)
    with pytest.raises(InvalidArgumentError):
        Sinogram(geometry=geom, values=rng.random((4, 13)))
