import numpy as np
import pytest

from lactk.nn import backward


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rel_vec_err(a: np.ndarray, b: np.ndarray, floor: float = 1e-12) -> float:
    """Relative disagreement of two vectors under the max norm."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    denom = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), floor)
    return float(np.abs(a - b).max(initial=0.0) / denom)


def gradcheck(make_loss, params, rng, n_entries=4, h=1e-5, zero_all=None):
    """Central finite differences on sampled entries of each parameter,
    compared against the tape gradient as one vector per parameter.

    Returns the worst relative error across parameters.  ``zero_all``
    lists every gradient-carrying tensor to reset between passes.
    """
    tensors = list(params)
    resets = list(zero_all) if zero_all is not None else tensors
    for t in resets:
        t.zero_grad()
    backward(make_loss())
    worst = 0.0
    for p in tensors:
        flat = p.values.ravel()
        k = min(n_entries, flat.size)
        idxs = rng.choice(flat.size, size=k, replace=False)
        fd = np.empty(k)
        an = np.empty(k)
        for j, idx in enumerate(idxs):
            orig = flat[idx]
            flat[idx] = orig + h
            lp = float(make_loss().values)
            flat[idx] = orig - h
            lm = float(make_loss().values)
            flat[idx] = orig
            fd[j] = (lp - lm) / (2 * h)
            an[j] = p.grad.ravel()[idx]
        worst = max(worst, rel_vec_err(fd, an, floor=1e-6))
    return worst
