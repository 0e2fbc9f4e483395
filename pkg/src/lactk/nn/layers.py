"""Convolution and batch-normalization kernels with hand-written backward
passes.

conv2d is a cross-correlation (no kernel flip) with the odd-sized window
centered on each output position and zero "same" padding, evaluated as one
matmul per filter tap so BLAS does the channel contraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError
from .tensor import Tensor, accumulate, from_op


@dataclass
class ConvParams:
    """Filters (kh, kw, in_ch, out_ch) and broadcastable biases (1,1,1,out_ch)."""

    filters: Tensor
    biases: Tensor

    @classmethod
    def initialize(cls, kh, kw, in_ch, out_ch, rng, dtype=np.float64, name=""):
        """Uniform +-sqrt(6/(fan_in+fan_out)) filters, zero biases."""
        bound = np.sqrt(6.0 / (kh * kw * in_ch + kh * kw * out_ch))
        f = rng.uniform(-bound, bound, size=(kh, kw, in_ch, out_ch)).astype(dtype)
        b = np.zeros((1, 1, 1, out_ch), dtype=dtype)
        return cls(
            filters=Tensor(f, requires_grad=True, name=f"{name}.filters"),
            biases=Tensor(b, requires_grad=True, name=f"{name}.biases"),
        )


@dataclass
class BnParams:
    """Per-channel scale/offset plus running statistics (shape (1,1,1,ch))."""

    scale: Tensor
    offset: Tensor
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.99
    eps: float = 1e-3

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidArgumentError("eps must be > 0")
        if np.any(self.running_var < 0):
            raise InvalidArgumentError("running variance must be >= 0")

    @classmethod
    def initialize(cls, ch, dtype=np.float64, name="", momentum=0.99, eps=1e-3):
        shape = (1, 1, 1, ch)
        return cls(
            scale=Tensor(np.ones(shape, dtype=dtype), requires_grad=True, name=f"{name}.scale"),
            offset=Tensor(np.zeros(shape, dtype=dtype), requires_grad=True, name=f"{name}.offset"),
            running_mean=np.zeros(shape, dtype=dtype),
            running_var=np.ones(shape, dtype=dtype),
            momentum=momentum,
            eps=eps,
        )


def conv2d(x: Tensor, p: ConvParams) -> Tensor:
    """Same-size centered cross-correlation plus bias, NHWC layout."""
    f, b = p.filters, p.biases
    kh, kw, cin, cout = f.values.shape
    if x.values.ndim != 4 or x.values.shape[3] != cin:
        raise InvalidArgumentError(
            f"conv2d input has shape {x.values.shape}, expected (n,h,w,{cin})"
        )
    n, h, w, _ = x.values.shape
    pt, pl = (kh - 1) // 2, (kw - 1) // 2
    pb, pr = kh - 1 - pt, kw - 1 - pl
    xp = np.pad(x.values, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    flt = f.values
    acc = np.zeros((n * h * w, cout), dtype=x.values.dtype)
    for d1 in range(kh):
        for d2 in range(kw):
            xs = xp[:, d1 : d1 + h, d2 : d2 + w, :].reshape(-1, cin)
            acc += xs @ flt[d1, d2]
    out = acc.reshape(n, h, w, cout) + b.values

    def bw(g):
        g2 = g.reshape(-1, cout)
        if b.requires_grad:
            accumulate(b, g.sum(axis=(0, 1, 2), keepdims=True))
        if f.requires_grad:
            df = np.empty_like(f.values)
            for d1 in range(kh):
                for d2 in range(kw):
                    xs = xp[:, d1 : d1 + h, d2 : d2 + w, :].reshape(-1, cin)
                    df[d1, d2] = xs.T @ g2
            accumulate(f, df)
        if x.requires_grad:
            dxp = np.zeros_like(xp)
            for d1 in range(kh):
                for d2 in range(kw):
                    dxp[:, d1 : d1 + h, d2 : d2 + w, :] += (g2 @ flt[d1, d2].T).reshape(
                        n, h, w, cin
                    )
            accumulate(x, dxp[:, pt : pt + h, pl : pl + w, :])

    return from_op(out, (x, f, b), bw)


def batchnorm(x: Tensor, p: BnParams, training: bool) -> Tensor:
    """Per-channel normalization over the (batch, height, width) axes.

    Training mode normalizes with the population statistics of the current
    batch and folds them into the running statistics with exponential
    moving average; inference mode uses the running statistics.
    """
    if x.values.ndim != 4 or x.values.shape[3] != p.scale.values.shape[3]:
        raise InvalidArgumentError(
            f"batchnorm input {x.values.shape} does not match {p.scale.values.shape[3]} channels"
        )
    tau, kappa = p.scale, p.offset
    axes = (0, 1, 2)
    if training:
        mean = x.values.mean(axis=axes, keepdims=True)
        var = x.values.var(axis=axes, keepdims=True)
        p.running_mean *= p.momentum
        p.running_mean += (1.0 - p.momentum) * mean
        p.running_var *= p.momentum
        p.running_var += (1.0 - p.momentum) * var
    else:
        mean = p.running_mean
        var = p.running_var
    inv_std = 1.0 / np.sqrt(var + p.eps)
    xhat = (x.values - mean) * inv_std
    out = tau.values * xhat + kappa.values

    def bw(g):
        if kappa.requires_grad:
            accumulate(kappa, g.sum(axis=axes, keepdims=True))
        if tau.requires_grad:
            accumulate(tau, (g * xhat).sum(axis=axes, keepdims=True))
        if not x.requires_grad:
            return
        gx = g * tau.values
        if not training:
            accumulate(x, gx * inv_std)
            return
        m = x.values.shape[0] * x.values.shape[1] * x.values.shape[2]
        xc = x.values - mean
        dvar = (gx * xc).sum(axis=axes, keepdims=True) * (-0.5) * inv_std**3
        dmean = (-gx * inv_std).sum(axis=axes, keepdims=True) + dvar * (-2.0 / m) * xc.sum(
            axis=axes, keepdims=True
        )
        accumulate(x, gx * inv_std + dvar * (2.0 / m) * xc + dmean / m)

    return from_op(out, (x, tau, kappa), bw)
