"""Unitary 2-D Fourier transform over (real, imaginary) channel pairs.

Forward and inverse are each scaled by 1/sqrt(H*W) so Plancherel holds
exactly; as real-linear maps they are mutual adjoints, which is what the
backward passes use.  Any height/width (including odd sizes) is supported.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError
from .tensor import Tensor, accumulate, from_op


def _to_complex(v: np.ndarray) -> np.ndarray:
    ctype = np.complex64 if v.dtype == np.float32 else np.complex128
    c = np.empty(v.shape[:3], dtype=ctype)
    c.real = v[..., 0]
    c.imag = v[..., 1]
    return c


def _to_channels(c: np.ndarray, dtype) -> np.ndarray:
    out = np.empty(c.shape + (2,), dtype=dtype)
    out[..., 0] = c.real
    out[..., 1] = c.imag
    return out


def _transform(x: Tensor, forward: bool) -> Tensor:
    v = x.values
    if v.ndim != 4 or v.shape[3] != 2:
        raise InvalidArgumentError(
            f"expected a (batch, h, w, 2) real/imaginary tensor, got {v.shape}"
        )
    fwd = np.fft.fft2 if forward else np.fft.ifft2
    inv = np.fft.ifft2 if forward else np.fft.fft2
    out = _to_channels(fwd(_to_complex(v), axes=(1, 2), norm="ortho"), v.dtype)

    def bw(g):
        gc = inv(_to_complex(np.ascontiguousarray(g)), axes=(1, 2), norm="ortho")
        accumulate(x, _to_channels(gc, v.dtype))

    return from_op(out, (x,), bw)


def fft2(x: Tensor) -> Tensor:
    """Unitary 2-D DFT of a two-channel tensor along (height, width)."""
    return _transform(x, forward=True)


def ifft2(x: Tensor) -> Tensor:
    """Unitary inverse 2-D DFT of a two-channel tensor."""
    return _transform(x, forward=False)
