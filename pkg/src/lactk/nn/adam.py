"""Bias-corrected Adam updates over a fixed parameter list."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DivergedError, InvalidArgumentError
from .tensor import Tensor


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, lr=0.001, beta1=0.9, beta2=0.999, eps_hat=1e-8):
        state = cls(lr=lr, beta1=beta1, beta2=beta2, eps_hat=eps_hat)
        state.m = [np.zeros_like(p.values) for p in params]
        state.v = [np.zeros_like(p.values) for p in params]
        return state


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState):
    """One in-place Adam update; returns (params, state).

    Raises DivergedError naming the offending parameter if its gradient
    contains non-finite entries.
    """
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise InvalidArgumentError("params/grads/state lengths disagree")
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.values.shape:
            raise InvalidArgumentError(
                f"gradient shape {g.shape} does not match parameter {p.name or i}"
            )
        if not np.all(np.isfinite(g)):
            raise DivergedError(f"non-finite gradient for parameter {p.name or i}")
        m = state.m[i]
        v = state.v[i]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.values = p.values - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps_hat)
    return params, state
