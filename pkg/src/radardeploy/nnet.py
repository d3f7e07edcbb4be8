"""Minimal dense-tensor layers with exact backpropagation.

Covers exactly what the policy network needs: valid-padding stride-1 2-D
convolution (cross-correlation, no bias), non-overlapping 2x2 max pooling,
sigmoid/tanh dense layers, a single LSTM cell, and Adam.  Forward passes
return caches consumed by the matching backward functions; everything is
float64 and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Params = dict[str, np.ndarray]
Grads = dict[str, np.ndarray]


def sigmoid(x: np.ndarray) -> np.ndarray:
    # evaluated via exp of the negative magnitude to avoid overflow
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_grad(y: np.ndarray) -> np.ndarray:
    """Derivative expressed through the forward output y = sigmoid(x)."""
    return y * (1.0 - y)


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def conv2d(x: np.ndarray, kernel: np.ndarray) -> tuple[np.ndarray, tuple]:
    """Valid stride-1 cross-correlation.

    x: (C_in, H, W); kernel: (kh, kw, C_in, C_out) -> (C_out, H-kh+1, W-kw+1).
    """
    c_in, h, w = x.shape
    kh, kw, kc_in, c_out = kernel.shape
    if kc_in != c_in:
        raise ValueError(f"kernel expects {kc_in} input channels, got {c_in}")
    if h < kh or w < kw:
        raise ValueError(f"input {h}x{w} smaller than kernel {kh}x{kw}")
    h2, w2 = h - kh + 1, w - kw + 1
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    cols = windows.transpose(1, 2, 0, 3, 4).reshape(h2 * w2, c_in * kh * kw)
    kmat = kernel.transpose(2, 0, 1, 3).reshape(c_in * kh * kw, c_out)
    out = (cols @ kmat).T.reshape(c_out, h2, w2)
    return out, (cols, kernel, x.shape)


def conv2d_backward(dout: np.ndarray, cache: tuple) -> tuple[np.ndarray, np.ndarray]:
    """Gradients (dx, dkernel) of conv2d."""
    cols, kernel, x_shape = cache
    c_in, h, w = x_shape
    kh, kw, _, c_out = kernel.shape
    h2, w2 = h - kh + 1, w - kw + 1
    dout_mat = dout.reshape(c_out, h2 * w2).T
    dk = (cols.T @ dout_mat).reshape(c_in, kh, kw, c_out).transpose(1, 2, 0, 3)
    kmat = kernel.transpose(2, 0, 1, 3).reshape(c_in * kh * kw, c_out)
    dcols = (dout_mat @ kmat.T).reshape(h2, w2, c_in, kh, kw)
    dx = np.zeros(x_shape)
    for a in range(kh):
        for b in range(kw):
            dx[:, a : a + h2, b : b + w2] += dcols[:, :, :, a, b].transpose(2, 0, 1)
    return dx, dk


def maxpool2(x: np.ndarray) -> tuple[np.ndarray, tuple]:
    """Non-overlapping 2x2 max pooling; odd trailing rows/columns drop."""
    c, h, w = x.shape
    if h < 2 or w < 2:
        raise ValueError(f"cannot 2x2-pool a {h}x{w} input")
    h2, w2 = h // 2, w // 2
    blocks = (
        x[:, : 2 * h2, : 2 * w2]
        .reshape(c, h2, 2, w2, 2)
        .transpose(0, 1, 3, 2, 4)
        .reshape(c, h2, w2, 4)
    )
    idx = blocks.argmax(axis=3)
    out = np.take_along_axis(blocks, idx[..., None], axis=3)[..., 0]
    return out, (idx, x.shape)


def maxpool2_backward(dout: np.ndarray, cache: tuple) -> np.ndarray:
    """Routes gradient only to the argmax position of each 2x2 block."""
    idx, x_shape = cache
    c, h, w = x_shape
    h2, w2 = h // 2, w // 2
    dblocks = np.zeros((c, h2, w2, 4))
    np.put_along_axis(dblocks, idx[..., None], dout[..., None], axis=3)
    dx = np.zeros(x_shape)
    dx[:, : 2 * h2, : 2 * w2] = (
        dblocks.reshape(c, h2, w2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, 2 * h2, 2 * w2)
    )
    return dx


def dense(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    if w.shape[1] != x.shape[0]:
        raise ValueError(f"dense weight {w.shape} incompatible with input {x.shape}")
    return w @ x + b


def dense_backward(
    dout: np.ndarray, x: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dw, db) of a dense layer."""
    return w.T @ dout, np.outer(dout, x), dout.copy()


def lstm_cell(
    x: np.ndarray,
    h: np.ndarray,
    c: np.ndarray,
    wx: np.ndarray,
    wh: np.ndarray,
    b: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, tuple]:
    """Standard LSTM cell; gate order in the stacked weights is i, f, o, g.

    Returns (y, h', c', cache) with y = h'.
    """
    n = h.size
    z = wx @ x + wh @ h + b
    gi = sigmoid(z[:n])
    gf = sigmoid(z[n : 2 * n])
    go = sigmoid(z[2 * n : 3 * n])
    gg = np.tanh(z[3 * n :])
    c_new = gf * c + gi * gg
    tc = np.tanh(c_new)
    h_new = go * tc
    cache = (x, h, c, gi, gf, go, gg, tc)
    return h_new, h_new, c_new, cache


def lstm_cell_backward(
    dh_new: np.ndarray,
    dc_new: np.ndarray,
    cache: tuple,
    wx: np.ndarray,
    wh: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dh, dc, dwx, dwh, db) of one cell application."""
    x, h, c, gi, gf, go, gg, tc = cache
    d_go = dh_new * tc
    dc_total = dc_new + dh_new * go * (1.0 - tc * tc)
    d_gi = dc_total * gg
    d_gf = dc_total * c
    d_gg = dc_total * gi
    dc_prev = dc_total * gf
    dz = np.concatenate(
        [
            d_gi * sigmoid_grad(gi),
            d_gf * sigmoid_grad(gf),
            d_go * sigmoid_grad(go),
            d_gg * (1.0 - gg * gg),
        ]
    )
    return wx.T @ dz, wh.T @ dz, dc_prev, np.outer(dz, x), np.outer(dz, h), dz


def mlp_forward(
    x: np.ndarray,
    layers: list[tuple[np.ndarray, np.ndarray]],
    output_sigmoid: bool = False,
) -> tuple[np.ndarray, list]:
    """Chain of dense layers, sigmoid on hidden layers; the final layer is
    linear unless output_sigmoid is set."""
    caches = []
    out = x
    last = len(layers) - 1
    for i, (w, b) in enumerate(layers):
        pre = dense(out, w, b)
        if i < last or output_sigmoid:
            act = sigmoid(pre)
            caches.append((out, act, True))
            out = act
        else:
            caches.append((out, pre, False))
            out = pre
    return out, caches


def mlp_backward(
    dout: np.ndarray,
    layers: list[tuple[np.ndarray, np.ndarray]],
    caches: list,
) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
    """Gradient of mlp_forward; returns (dx, [(dw, db), ...]) in layer order."""
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)  # type: ignore
    d = dout
    for i in range(len(layers) - 1, -1, -1):
        x_in, out, activated = caches[i]
        if activated:
            d = d * sigmoid_grad(out)
        d, dw, db = dense_backward(d, x_in, layers[i][0])
        grads[i] = (dw, db)
    return d, grads


def glorot_uniform(
    rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int
) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


@dataclass
class AdamState:
    """First/second-moment accumulators plus a shared step counter."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)
    count: int = 0


def adam_step(
    params: Params,
    grads: Grads,
    state: AdamState,
    lr: float | Callable[[str], float],
) -> None:
    """One bias-corrected Adam update, in place.

    ``lr`` is a float or a per-parameter-name resolver (used to give the
    encoder, actor and critic their own rates in a single step).
    """
    state.count += 1
    t = state.count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        rate = lr(name) if callable(lr) else lr
        params[name] -= rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
