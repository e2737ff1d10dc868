"""Finite-difference verification of analytic gradients.

Central differences against the autodiff result, element-sampled. Run in
float64: float32 rounding would drown the 1e-4 tolerance this exists to
enforce.
"""

from __future__ import annotations

import numpy as np

from .tensor import NdError, Tensor, backward, zero_grads


def finite_diff_check(
    loss_fn,
    params: dict,
    h: float = 1e-5,
    max_elements_per_param: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn()`` must rebuild the scalar loss from the current contents of
    ``params`` (all float64). When a parameter has more elements than
    ``max_elements_per_param``, a random subset is probed.
    """
    for name, p in params.items():
        if p.dtype != np.float64:
            raise NdError(f"finite_diff_check requires float64 params ({name!r})")

    zero_grads(params)
    loss = loss_fn()
    backward(loss)
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }

    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_elements_per_param is not None and flat.size > max_elements_per_param:
            if rng is None:
                rng = np.random.default_rng(0)
            idx = rng.choice(flat.size, size=max_elements_per_param, replace=False)
        an_flat = analytic[name].reshape(-1)
        for j in idx:
            orig = flat[j]
            flat[j] = orig + h
            up = loss_fn().item()
            flat[j] = orig - h
            down = loss_fn().item()
            flat[j] = orig
            fd = (up - down) / (2.0 * h)
            an = an_flat[j]
            denom = max(abs(fd), abs(an))
            err = 0.0 if denom < 1e-10 else abs(fd - an) / denom
            worst = max(worst, err)
    return worst
