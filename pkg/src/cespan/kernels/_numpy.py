"""Pure-numpy kernel implementations.

Reference path for the numba kernels in ``_numba``: same signatures, same
operation order (scatter accumulation runs in edge order, recurrences step
per timestep), so the two backends agree to rounding.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


# -- graph neighbor aggregation ---------------------------------------------

def segment_mean_forward(x, src, dst, indeg):
    """Mean of in-neighbor rows: out[v] = mean(x[u] for (u -> v) in edges).

    Zero in-degree rows stay zero.
    """
    out = np.zeros((indeg.shape[0], x.shape[1]), dtype=x.dtype)
    np.add.at(out, dst, x[src])
    nz = indeg > 0
    out[nz] /= indeg[nz, None].astype(x.dtype)
    return out


def segment_mean_backward(grad_out, src, dst, indeg, n_rows):
    """Adjoint of segment_mean_forward with respect to x (shape (n_rows, d))."""
    scaled = grad_out / np.maximum(indeg, 1)[:, None].astype(grad_out.dtype)
    grad_x = np.zeros((n_rows, grad_out.shape[1]), dtype=grad_out.dtype)
    np.add.at(grad_x, src, scaled[dst])
    return grad_x


# -- single-direction LSTM ---------------------------------------------------

def lstm_forward(x_proj, w_h):
    """Run an LSTM over precomputed input projections (float64 only).

    x_proj is (n, 4H): x @ W_x + b for every step, gate order [i, f, g, o].
    Initial hidden and cell states are zero. Returns (h, gates, c) where
    gates holds post-activation values for the backward pass.
    """
    n, g4 = x_proj.shape
    H = g4 // 4
    h = np.zeros((n, H), dtype=np.float64)
    gates = np.empty((n, g4), dtype=np.float64)
    c = np.zeros((n, H), dtype=np.float64)
    h_prev = np.zeros(H, dtype=np.float64)
    c_prev = np.zeros(H, dtype=np.float64)
    for t in range(n):
        a = x_proj[t] + np.dot(h_prev, w_h)
        i = 1.0 / (1.0 + np.exp(-a[:H]))
        f = 1.0 / (1.0 + np.exp(-a[H : 2 * H]))
        g = np.tanh(a[2 * H : 3 * H])
        o = 1.0 / (1.0 + np.exp(-a[3 * H :]))
        c_t = f * c_prev + i * g
        h_t = o * np.tanh(c_t)
        gates[t, :H] = i
        gates[t, H : 2 * H] = f
        gates[t, 2 * H : 3 * H] = g
        gates[t, 3 * H :] = o
        c[t] = c_t
        h[t] = h_t
        h_prev = h_t
        c_prev = c_t
    return h, gates, c


def lstm_backward(grad_h, gates, c, h, w_h):
    """Backprop through time; returns (grad_x_proj, grad_w_h)."""
    n, g4 = gates.shape
    H = g4 // 4
    grad_xp = np.zeros((n, g4), dtype=np.float64)
    dh_next = np.zeros(H, dtype=np.float64)
    dc_next = np.zeros(H, dtype=np.float64)
    zeros = np.zeros(H, dtype=np.float64)
    for t in range(n - 1, -1, -1):
        i = gates[t, :H]
        f = gates[t, H : 2 * H]
        g = gates[t, 2 * H : 3 * H]
        o = gates[t, 3 * H :]
        tc = np.tanh(c[t])
        dh = grad_h[t] + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        di = dc * g
        dg = dc * i
        c_prev = c[t - 1] if t > 0 else zeros
        df = dc * c_prev
        da = grad_xp[t]
        da[:H] = di * i * (1.0 - i)
        da[H : 2 * H] = df * f * (1.0 - f)
        da[2 * H : 3 * H] = dg * (1.0 - g * g)
        da[3 * H :] = do * o * (1.0 - o)
        dh_next = np.dot(w_h, da)
        dc_next = dc * f
    # grad_wh = sum_t h_{t-1} (outer) da_t, batched as one matmul.
    h_prev_t = np.zeros((H, n), dtype=np.float64)
    h_prev_t[:, 1:] = h[:-1].T
    grad_wh = np.dot(h_prev_t, grad_xp)
    return grad_xp, grad_wh


# -- Viterbi decoding ---------------------------------------------------------

def viterbi_path(log_emissions, log_start, log_trans):
    """Highest-scoring tag path; ties resolve to the lexicographically
    smallest tag-index sequence.

    The sweep runs from the last position backward storing forward
    pointers, so reconstruction picks the smallest tag greedily from the
    front, which realizes the lexicographic tie-break exactly.
    """
    n, k = log_emissions.shape
    beta = np.empty((n, k), dtype=np.float64)
    fwd = np.zeros((n, k), dtype=np.int32)
    beta[n - 1] = log_emissions[n - 1]
    for t in range(n - 2, -1, -1):
        scores = log_trans + beta[t + 1][None, :]  # (from, to)
        best = scores.max(axis=1)
        fwd[t] = scores.argmax(axis=1)
        beta[t] = log_emissions[t] + best
    first = log_start + beta[0]
    path = np.empty(n, dtype=np.int32)
    path[0] = int(first.argmax())
    best_score = first[path[0]]
    for t in range(1, n):
        path[t] = fwd[t - 1, path[t - 1]]
    return path, float(best_score)
