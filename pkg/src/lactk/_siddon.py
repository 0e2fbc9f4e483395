"""Ray-grid traversal kernels (exact intersection lengths).

Rays are given in world coordinates (origin + unit direction); the grid
box spans [-W/2, W/2] x [-H/2, H/2] in units of pixel_size.  Traversal
visits every pixel a ray crosses and weights it by the exact chord length,
so the scatter kernel is the exact transpose of the gather kernel.

All arithmetic is float64 regardless of the caller's storage dtype.
"""

import numpy as np
from numba import config as _numba_config
from numba import njit, prange

# prefer OpenMP/workqueue; the sandbox TBB is too old and warns if probed
_numba_config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

_INF = np.inf
_EPS = 1e-12


@njit(cache=True, inline="always")
def _ray_accumulate(img, sino, iray, ox, oy, dx, dy, h, w, px, gather):
    # positions in index space: X in [0,w], Y in [0,h]
    inv = 1.0 / px
    OX = ox * inv + 0.5 * w
    OY = oy * inv + 0.5 * h
    DX = dx * inv
    DY = dy * inv

    smin = -_INF
    smax = _INF
    if abs(DX) > _EPS:
        sa = (0.0 - OX) / DX
        sb = (w - OX) / DX
        smin = max(smin, min(sa, sb))
        smax = min(smax, max(sa, sb))
    elif OX < 0.0 or OX > w:
        return 0.0
    if abs(DY) > _EPS:
        sa = (0.0 - OY) / DY
        sb = (h - OY) / DY
        smin = max(smin, min(sa, sb))
        smax = min(smax, max(sa, sb))
    elif OY < 0.0 or OY > h:
        return 0.0
    if smin >= smax:
        return 0.0

    t = smin
    ix = int(np.floor(OX + t * DX))
    iy = int(np.floor(OY + t * DY))

    step_x = 1 if DX >= 0 else -1
    step_y = 1 if DY >= 0 else -1
    dt_x = abs(1.0 / DX) if abs(DX) > _EPS else _INF
    dt_y = abs(1.0 / DY) if abs(DY) > _EPS else _INF
    tx = ((ix + (1 if step_x > 0 else 0)) - OX) / DX if abs(DX) > _EPS else _INF
    ty = ((iy + (1 if step_y > 0 else 0)) - OY) / DY if abs(DY) > _EPS else _INF

    acc = 0.0
    val = 0.0 if gather else sino[iray]
    while t < smax:
        t_next = min(min(tx, ty), smax)
        seg = t_next - t
        if seg > 0.0 and 0 <= ix < w and 0 <= iy < h:
            if gather:
                acc += img[iy, ix] * seg
            else:
                img[iy, ix] += val * seg
        if tx <= ty:
            t = tx
            ix += step_x
            tx += dt_x
        else:
            t = ty
            iy += step_y
            ty += dt_y
    return acc


@njit(cache=True, parallel=True)
def siddon_forward(img, ox, oy, dx, dy, px, out):
    """Gather line integrals: out[r] = sum_j len(ray r, pixel j) * img[j]."""
    h, w = img.shape
    for r in prange(out.size):
        out[r] = _ray_accumulate(img, out, r, ox[r], oy[r], dx[r], dy[r], h, w, px, True)


@njit(cache=True)
def siddon_adjoint(sino, ox, oy, dx, dy, px, out_img):
    """Scatter transpose of :func:`siddon_forward` (serial: pixels are shared)."""
    h, w = out_img.shape
    for r in range(sino.size):
        _ray_accumulate(out_img, sino, r, ox[r], oy[r], dx[r], dy[r], h, w, px, False)
