"""Numba-compiled kernels; drop-in twins of ``_numpy``.

Serial loops only: results must stay deterministic for a fixed seed, so no
prange. ``cache=True`` persists compilation across processes.
"""

from __future__ import annotations

import numpy as np
from numba import njit

BACKEND = "numba"


@njit(cache=True)
def _segment_mean_forward(x, src, dst, indeg):
    n_nodes = indeg.shape[0]
    d = x.shape[1]
    out = np.zeros((n_nodes, d), dtype=x.dtype)
    for e in range(src.shape[0]):
        s = src[e]
        t = dst[e]
        for j in range(d):
            out[t, j] += x[s, j]
    for v in range(n_nodes):
        deg = indeg[v]
        if deg > 0:
            for j in range(d):
                out[v, j] /= deg
    return out


def segment_mean_forward(x, src, dst, indeg):
    return _segment_mean_forward(x, src, dst, indeg)


@njit(cache=True)
def _segment_mean_backward(grad_out, src, dst, indeg, n_rows):
    d = grad_out.shape[1]
    grad_x = np.zeros((n_rows, d), dtype=grad_out.dtype)
    for e in range(src.shape[0]):
        s = src[e]
        t = dst[e]
        deg = indeg[t]
        if deg > 0:
            for j in range(d):
                grad_x[s, j] += grad_out[t, j] / deg
    return grad_x


def segment_mean_backward(grad_out, src, dst, indeg, n_rows):
    return _segment_mean_backward(grad_out, src, dst, indeg, n_rows)


@njit(cache=True)
def _lstm_forward(x_proj, w_h):
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


def lstm_forward(x_proj, w_h):
    return _lstm_forward(x_proj, w_h)


@njit(cache=True)
def _lstm_backward(grad_h, gates, c, h, w_h):
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
    for t in range(1, n):
        for j in range(H):
            h_prev_t[j, t] = h[t - 1, j]
    grad_wh = np.dot(h_prev_t, grad_xp)
    return grad_xp, grad_wh


def lstm_backward(grad_h, gates, c, h, w_h):
    return _lstm_backward(grad_h, gates, c, h, w_h)


@njit(cache=True)
def _viterbi_path(log_emissions, log_start, log_trans):
    n, k = log_emissions.shape
    beta = np.empty((n, k), dtype=np.float64)
    fwd = np.zeros((n, k), dtype=np.int32)
    for j in range(k):
        beta[n - 1, j] = log_emissions[n - 1, j]
    for t in range(n - 2, -1, -1):
        for j in range(k):
            best = -np.inf
            arg = 0
            for nxt in range(k):
                s = log_trans[j, nxt] + beta[t + 1, nxt]
                if s > best:
                    best = s
                    arg = nxt
            beta[t, j] = log_emissions[t, j] + best
            fwd[t, j] = arg
    best = -np.inf
    first = 0
    for j in range(k):
        s = log_start[j] + beta[0, j]
        if s > best:
            best = s
            first = j
    path = np.empty(n, dtype=np.int32)
    path[0] = first
    for t in range(1, n):
        path[t] = fwd[t - 1, path[t - 1]]
    return path, best


def viterbi_path(log_emissions, log_start, log_trans):
    return _viterbi_path(log_emissions, log_start, log_trans)


def warmup():
    """Trigger compilation of every kernel on tiny inputs."""
    x = np.ones((2, 3), dtype=np.float64)
    src = np.array([0], dtype=np.int64)
    dst = np.array([1], dtype=np.int64)
    indeg = np.array([0, 1], dtype=np.int64)
    segment_mean_forward(x, src, dst, indeg)
    segment_mean_backward(x, src, dst, indeg, 2)
    segment_mean_forward(x.astype(np.float32), src, dst, indeg)
    segment_mean_backward(x.astype(np.float32), src, dst, indeg, 2)
    xp = np.zeros((2, 8), dtype=np.float64)
    wh = np.zeros((2, 8), dtype=np.float64)
    h, gates, c = lstm_forward(xp, wh)
    lstm_backward(h, gates, c, h, wh)
    viterbi_path(
        np.zeros((2, 5), dtype=np.float64),
        np.zeros(5, dtype=np.float64),
        np.zeros((5, 5), dtype=np.float64),
    )
