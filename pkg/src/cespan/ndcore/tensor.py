"""Dense tensors with reverse-mode automatic differentiation.

Small tape-based engine in the micrograd style: ops build a graph of
Tensor nodes, ``backward`` walks it in reverse topological order and
accumulates exact analytic gradients. Training runs in float32; gradient
checking runs the same graph in float64.

The LSTM recurrence and graph-neighbor aggregation forward/backward pairs
live in :mod:`cespan.kernels` and plug in here as single fused ops.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import CespanError


class NdError(CespanError):
    pass


DEFAULT_DTYPE = np.float32


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def accumulate_grad(self, g: np.ndarray, owned: bool = False) -> None:
        # owned=True: g is freshly computed for this call and may be
        # adopted without copying. Pass owned=False whenever g aliases a
        # buffer another parent also receives (add's pass-through case).
        if self.grad is None:
            self.grad = g if owned else np.array(g, dtype=self.data.dtype)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape}, dtype={self.data.dtype.name})"


def _node(data, parents, backward_fn) -> Tensor:
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _check_same_dtype(*tensors):
    dtypes = {t.dtype for t in tensors}
    if len(dtypes) > 1:
        raise NdError(f"mixed tensor dtypes: {sorted(d.name for d in dtypes)}")


def backward(root: Tensor, seed: float = 1.0) -> None:
    """Backpropagate from a scalar ``root``; seeds its gradient with ``seed``.

    Gradients accumulate into every requires_grad leaf, adding to whatever
    is already there (callers zero grads between optimizer steps, not
    between the examples of a batch).
    """
    if root.data.size != 1:
        raise NdError(f"backward needs a scalar, got shape {root.data.shape}")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited and parent.requires_grad:
                stack.append((parent, False))

    root.grad = np.full_like(root.data, seed)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grads(params) -> None:
    values = params.values() if hasattr(params, "values") else params
    for p in values:
        p.zero_grad()


# ---------------------------------------------------------------------------
# Primitive ops
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise NdError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    _check_same_dtype(a, b)
    out_data = a.data @ b.data

    def backward_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g @ b.data.T, owned=True)
        if b.requires_grad:
            b.accumulate_grad(a.data.T @ g, owned=True)

    return _node(out_data, (a, b), backward_fn)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; a 1-D ``b`` broadcasts over the rows of a 2-D ``a``."""
    _check_same_dtype(a, b)
    bias_mode = a.data.ndim == 2 and b.data.ndim == 1
    if bias_mode:
        if b.shape[0] != a.shape[1]:
            raise NdError(f"add bias mismatch: {a.shape} + {b.shape}")
    elif a.shape != b.shape:
        raise NdError(f"add shape mismatch: {a.shape} + {b.shape}")
    out_data = a.data + b.data

    def backward_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            if bias_mode:
                b.accumulate_grad(g.sum(axis=0), owned=True)
            else:
                b.accumulate_grad(g)

    return _node(out_data, (a, b), backward_fn)


def concat_features(tensors) -> Tensor:
    """Concatenate along the feature axis (axis 1)."""
    tensors = list(tensors)
    if not tensors:
        raise NdError("concat_features of nothing")
    rows = {t.shape[0] for t in tensors}
    if len(rows) > 1 or any(t.data.ndim != 2 for t in tensors):
        raise NdError(
            f"concat_features row mismatch: {[t.shape for t in tensors]}"
        )
    _check_same_dtype(*tensors)
    out_data = np.concatenate([t.data for t in tensors], axis=1)
    offsets = np.cumsum([0] + [t.shape[1] for t in tensors])

    def backward_fn(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                t.accumulate_grad(g[:, lo:hi], owned=True)

    return _node(out_data, tuple(tensors), backward_fn)


def relu(x: Tensor) -> Tensor:
    out_data = np.maximum(x.data, 0)

    def backward_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g * (x.data > 0), owned=True)

    return _node(out_data, (x,), backward_fn)


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)

    def backward_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g * (1.0 - out_data * out_data), owned=True)

    return _node(out_data, (x,), backward_fn)


def sigmoid(x: Tensor) -> Tensor:
    out_data = 1.0 / (1.0 + np.exp(-x.data))

    def backward_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g * out_data * (1.0 - out_data), owned=True)

    return _node(out_data, (x,), backward_fn)


def softmax(x: Tensor) -> Tensor:
    """Row-wise softmax of a 2-D tensor."""
    if x.data.ndim != 2:
        raise NdError(f"softmax expects 2-D logits, got {x.shape}")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=1, keepdims=True)

    def backward_fn(g):
        if x.requires_grad:
            inner = (g * out_data).sum(axis=1, keepdims=True)
            x.accumulate_grad((g - inner) * out_data, owned=True)

    return _node(out_data, (x,), backward_fn)


def log_softmax_values(logits: np.ndarray) -> np.ndarray:
    """Plain-array log-softmax used on the inference path (no grad)."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def dropout(x: Tensor, rho: float, mode: str, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero with probability rho, scale survivors by
    1/(1-rho) in train mode; identity in eval mode."""
    if not 0.0 <= rho < 1.0:
        raise NdError(f"dropout probability {rho} outside [0, 1)")
    if mode not in ("train", "eval"):
        raise NdError(f"dropout mode {mode!r}: expected 'train' or 'eval'")
    if mode == "eval" or rho == 0.0:
        return x
    keep = (rng.random(x.shape) >= rho).astype(x.dtype)
    scale = x.dtype.type(1.0 / (1.0 - rho))
    out_data = x.data * keep * scale

    def backward_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g * keep * scale, owned=True)

    return _node(out_data, (x,), backward_fn)


def cross_entropy(logits: Tensor, targets, mask=None) -> Tensor:
    """Mean negative log-likelihood over unmasked rows.

    ``targets`` holds one class index per row; ``mask`` (optional boolean,
    True = keep) excludes rows from the mean entirely.
    """
    if logits.data.ndim != 2:
        raise NdError(f"cross_entropy expects 2-D logits, got {logits.shape}")
    targets = np.asarray(targets)
    n, c = logits.shape
    if targets.shape != (n,):
        raise NdError(f"targets shape {targets.shape} != ({n},)")
    if targets.size and (targets.min() < 0 or targets.max() >= c):
        raise NdError(f"target class out of range for {c} classes")
    if mask is None:
        keep = np.ones(n, dtype=bool)
    else:
        keep = np.asarray(mask, dtype=bool)
        if keep.shape != (n,):
            raise NdError(f"mask shape {keep.shape} != ({n},)")
    n_kept = int(keep.sum())
    if n_kept == 0:
        raise NdError("cross_entropy: every row is masked out")

    log_probs = log_softmax_values(logits.data)
    picked = log_probs[np.arange(n), targets]
    loss = -(picked[keep].sum()) / n_kept
    out_data = np.asarray(loss, dtype=logits.dtype)

    def backward_fn(g):
        if logits.requires_grad:
            probs = np.exp(log_probs)
            probs[np.arange(n), targets] -= 1.0
            probs[~keep] = 0.0
            logits.accumulate_grad(probs * (g.reshape(()) / n_kept), owned=True)

    return _node(out_data, (logits,), backward_fn)


# ---------------------------------------------------------------------------
# Fused structured ops (kernel-backed)
# ---------------------------------------------------------------------------

def neighbor_mean(x: Tensor, src: np.ndarray, dst: np.ndarray, indeg: np.ndarray) -> Tensor:
    """Per-node mean of in-neighbor rows along directed edges src -> dst.

    Nodes with no in-edges get a zero row.
    """
    if x.data.ndim != 2 or indeg.shape[0] != x.shape[0]:
        raise NdError(
            f"neighbor_mean: features {x.shape} vs {indeg.shape[0]} nodes"
        )
    out_data = kernels.segment_mean_forward(x.data, src, dst, indeg)

    def backward_fn(g):
        if x.requires_grad:
            x.accumulate_grad(
                kernels.segment_mean_backward(g, src, dst, indeg, x.shape[0]),
                owned=True,
            )

    return _node(out_data, (x,), backward_fn)


def lstm_direction(x_proj: Tensor, w_h: Tensor) -> Tensor:
    """One LSTM direction over precomputed input projections.

    ``x_proj`` is (n, 4H) holding x@W_x + b per step (gate order i,f,g,o);
    ``w_h`` is the (H, 4H) recurrent weight. Initial states are zero. The
    recurrence runs in float64 inside the kernel and casts back.
    """
    if x_proj.data.ndim != 2 or x_proj.shape[1] % 4 != 0:
        raise NdError(f"lstm_direction: bad x_proj shape {x_proj.shape}")
    hidden = x_proj.shape[1] // 4
    if w_h.shape != (hidden, 4 * hidden):
        raise NdError(
            f"lstm_direction: w_h shape {w_h.shape} != {(hidden, 4 * hidden)}"
        )
    _check_same_dtype(x_proj, w_h)
    xp64 = np.ascontiguousarray(x_proj.data, dtype=np.float64)
    wh64 = np.ascontiguousarray(w_h.data, dtype=np.float64)
    h, gates, c = kernels.lstm_forward(xp64, wh64)
    out_data = h.astype(x_proj.dtype)

    def backward_fn(g):
        grad_xp, grad_wh = kernels.lstm_backward(
            np.ascontiguousarray(g, dtype=np.float64), gates, c, h, wh64
        )
        if x_proj.requires_grad:
            x_proj.accumulate_grad(grad_xp.astype(x_proj.dtype), owned=True)
        if w_h.requires_grad:
            w_h.accumulate_grad(grad_wh.astype(w_h.dtype), owned=True)

    return _node(out_data, (x_proj, w_h), backward_fn)


def flip_rows(x: Tensor) -> Tensor:
    """Reverse row order (sequence reversal for the backward LSTM)."""
    out_data = x.data[::-1].copy()

    def backward_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g[::-1], owned=True)

    return _node(out_data, (x,), backward_fn)
