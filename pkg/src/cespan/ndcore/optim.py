"""Adam with bias correction and the linear learning-rate decay schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import NdError, Tensor


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        state = cls(beta1=beta1, beta2=beta2, eps=eps)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        return state


def adam_step(params: dict, state: AdamState, lr: float, grad_scale: float = 1.0) -> None:
    """One bias-corrected Adam update over every parameter in ``params``.

    Parameters without an accumulated gradient are treated as zero-grad.
    ``grad_scale`` divides the raw accumulated gradients (batch averaging).
    Non-finite gradients abort immediately.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for name, p in params.items():
        if name not in state.m:
            raise NdError(f"optimizer state missing parameter {name!r}")
        if state.m[name].shape != p.data.shape:
            raise NdError(
                f"optimizer state shape {state.m[name].shape} != parameter "
                f"{name!r} shape {p.data.shape}"
            )
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            raise NdError(f"non-finite gradient in parameter {name!r}")
        if grad_scale != 1.0:
            g = g / p.dtype.type(grad_scale)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p.data -= (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype)


@dataclass(frozen=True)
class LrSchedule:
    """Linear decay from base_lr at step 0 to zero at step total_steps."""

    base_lr: float
    total_steps: int

    def lr(self, step: int) -> float:
        if self.total_steps <= 0:
            return self.base_lr
        return self.base_lr * max(0.0, 1.0 - step / self.total_steps)
