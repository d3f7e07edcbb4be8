"""Policy network: convolutional/LSTM heatmap encoder feeding a diagonal
Gaussian actor and a value critic, plus the binary checkpoint format.

The encoder consumes the stacked (probability, thresholded) heatmap pair,
runs it through up to three conv/sigmoid/maxpool stages, a sigmoid dense
chain, one LSTM cell carrying state across the deployment sequence, and a
final dense block.  The 64-d embedding is concatenated with the jammer
coordinates, deployment history and turn one-hot before the heads.
"""

from __future__ import annotations

import math
import os
import struct
import tempfile

import numpy as np

from .geometry import GridSpec
from .nnet import (
    AdamState,
    Grads,
    Params,
    conv2d,
    conv2d_backward,
    glorot_uniform,
    lstm_cell,
    lstm_cell_backward,
    maxpool2,
    maxpool2_backward,
    mlp_backward,
    mlp_forward,
    sigmoid,
    sigmoid_grad,
    softplus,
)

GRID_CHANNELS = 2
EMBED_SIZE = 64
ENC_MLP_SIZES = (128, 64, 64)
LSTM_HIDDEN = 64
HEAD_HIDDEN = 64
ACTION_DIM = 2
SIGMA_FLOOR = 1e-3
CONV_KERNELS = ((5, 5, GRID_CHANNELS, 6), (3, 3, 6, 16), (3, 3, 16, 10))

CHECKPOINT_MAGIC = b"FARDANET1"

LOG_2PI = math.log(2.0 * math.pi)


def conv_plan(ny: int, nx: int) -> tuple[list[tuple[int, int, int, int]], tuple[int, int, int]]:
    """Conv/pool stages that fit a (ny, nx) heatmap, and the output shape.

    Stages apply in order while the running spatial extent still admits a
    valid convolution and a 2x2 pool; smaller grids simply use fewer stages.
    """
    h, w, c = ny, nx, GRID_CHANNELS
    applied = []
    for kh, kw, c_in, c_out in CONV_KERNELS:
        if h < kh + 1 or w < kw + 1:  # conv then pool must leave >= 1 pixel
            break
        applied.append((kh, kw, c_in, c_out))
        h = (h - kh + 1) // 2
        w = (w - kw + 1) // 2
        c = c_out
    if not applied:
        raise ValueError(f"grid {ny}x{nx} too small for the first conv stage")
    return applied, (c, h, w)


def gaussian_log_prob(action: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> float:
    z = (action - mu) / sigma
    return float(np.sum(-0.5 * z * z - np.log(sigma) - 0.5 * LOG_2PI))


def gaussian_entropy(sigma: np.ndarray) -> float:
    return float(np.sum(0.5 * (1.0 + LOG_2PI) + np.log(sigma)))


def assemble_input(
    embedding: np.ndarray,
    jammer_vec: np.ndarray,
    history: np.ndarray,
    one_hot: np.ndarray,
) -> np.ndarray:
    """Concatenate (embedding, jammers, history, turn one-hot), in that order."""
    return np.concatenate([embedding, jammer_vec, history, one_hot])


class PolicyNetwork:
    """Owns the parameter dict and the forward/backward passes."""

    def __init__(
        self,
        grid: GridSpec,
        params: Params,
        n_jammers: int = 3,
        n_radars: int = 4,
        sigma_floor: float = SIGMA_FLOOR,
    ):
        self.grid = grid
        self.params = params
        self.n_jammers = n_jammers
        self.n_radars = n_radars
        self.sigma_floor = sigma_floor
        self.conv_stages, self.conv_out_shape = conv_plan(grid.ny, grid.nx)
        self.flat_size = int(np.prod(self.conv_out_shape))
        self.input_size = EMBED_SIZE + 2 * n_jammers + 2 * n_radars + n_radars
        self._validate_shapes()

    # --- construction ---

    @classmethod
    def initialized(
        cls,
        grid: GridSpec,
        rng: np.random.Generator,
        n_jammers: int = 3,
        n_radars: int = 4,
        sigma_floor: float = SIGMA_FLOOR,
    ) -> "PolicyNetwork":
        stages, _ = conv_plan(grid.ny, grid.nx)
        flat = int(np.prod(cls._conv_output_shape(grid.ny, grid.nx, stages)))
        input_size = EMBED_SIZE + 2 * n_jammers + 2 * n_radars + n_radars
        params: Params = {}

        def dense_init(name: str, n_out: int, n_in: int) -> None:
            params[f"{name}.w"] = glorot_uniform(rng, (n_out, n_in), n_in, n_out)
            params[f"{name}.b"] = np.zeros(n_out)

        for i, (kh, kw, c_in, c_out) in enumerate(stages, start=1):
            fan_in = kh * kw * c_in
            fan_out = kh * kw * c_out
            params[f"encoder.conv{i}.k"] = glorot_uniform(
                rng, (kh, kw, c_in, c_out), fan_in, fan_out
            )
        sizes = (flat,) + ENC_MLP_SIZES
        for i in range(len(ENC_MLP_SIZES)):
            dense_init(f"encoder.fc{i + 1}", sizes[i + 1], sizes[i])
        n = LSTM_HIDDEN
        params["encoder.lstm.wx"] = glorot_uniform(rng, (4 * n, n), n, 4 * n)
        params["encoder.lstm.wh"] = glorot_uniform(rng, (4 * n, n), n, 4 * n)
        bias = np.zeros(4 * n)
        bias[n : 2 * n] = 1.0  # forget gate starts open
        params["encoder.lstm.b"] = bias
        dense_init("encoder.post1", HEAD_HIDDEN, n)
        dense_init("encoder.post2", EMBED_SIZE, HEAD_HIDDEN)
        dense_init("actor.fc1", HEAD_HIDDEN, input_size)
        dense_init("actor.fc2", 2 * ACTION_DIM, HEAD_HIDDEN)
        dense_init("critic.fc1", HEAD_HIDDEN, input_size)
        dense_init("critic.fc2", 1, HEAD_HIDDEN)
        return cls(grid, params, n_jammers, n_radars, sigma_floor)

    @staticmethod
    def _conv_output_shape(ny: int, nx: int, stages) -> tuple[int, int, int]:
        h, w, c = ny, nx, GRID_CHANNELS
        for kh, kw, _, c_out in stages:
            h = (h - kh + 1) // 2
            w = (w - kw + 1) // 2
            c = c_out
        return (c, h, w)

    def _validate_shapes(self) -> None:
        expected: dict[str, tuple[int, ...]] = {}
        for i, (kh, kw, c_in, c_out) in enumerate(self.conv_stages, start=1):
            expected[f"encoder.conv{i}.k"] = (kh, kw, c_in, c_out)
        sizes = (self.flat_size,) + ENC_MLP_SIZES
        for i in range(len(ENC_MLP_SIZES)):
            expected[f"encoder.fc{i + 1}.w"] = (sizes[i + 1], sizes[i])
            expected[f"encoder.fc{i + 1}.b"] = (sizes[i + 1],)
        n = LSTM_HIDDEN
        expected["encoder.lstm.wx"] = (4 * n, n)
        expected["encoder.lstm.wh"] = (4 * n, n)
        expected["encoder.lstm.b"] = (4 * n,)
        expected["encoder.post1.w"] = (HEAD_HIDDEN, n)
        expected["encoder.post1.b"] = (HEAD_HIDDEN,)
        expected["encoder.post2.w"] = (EMBED_SIZE, HEAD_HIDDEN)
        expected["encoder.post2.b"] = (EMBED_SIZE,)
        expected["actor.fc1.w"] = (HEAD_HIDDEN, self.input_size)
        expected["actor.fc1.b"] = (HEAD_HIDDEN,)
        expected["actor.fc2.w"] = (2 * ACTION_DIM, HEAD_HIDDEN)
        expected["actor.fc2.b"] = (2 * ACTION_DIM,)
        expected["critic.fc1.w"] = (HEAD_HIDDEN, self.input_size)
        expected["critic.fc1.b"] = (HEAD_HIDDEN,)
        expected["critic.fc2.w"] = (1, HEAD_HIDDEN)
        expected["critic.fc2.b"] = (1,)
        for name, shape in expected.items():
            if name not in self.params:
                raise ValueError(f"missing parameter {name}")
            if self.params[name].shape != shape:
                raise ValueError(
                    f"parameter {name} has shape {self.params[name].shape}, expected {shape}"
                )

    # --- layer views (always read through the live dict) ---

    def _enc_layers(self):
        return [
            (self.params[f"encoder.fc{i + 1}.w"], self.params[f"encoder.fc{i + 1}.b"])
            for i in range(len(ENC_MLP_SIZES))
        ]

    def _post_layers(self):
        return [
            (self.params["encoder.post1.w"], self.params["encoder.post1.b"]),
            (self.params["encoder.post2.w"], self.params["encoder.post2.b"]),
        ]

    def _actor_layers(self):
        return [
            (self.params["actor.fc1.w"], self.params["actor.fc1.b"]),
            (self.params["actor.fc2.w"], self.params["actor.fc2.b"]),
        ]

    def _critic_layers(self):
        return [
            (self.params["critic.fc1.w"], self.params["critic.fc1.b"]),
            (self.params["critic.fc2.w"], self.params["critic.fc2.b"]),
        ]

    def zero_state(self) -> tuple[np.ndarray, np.ndarray]:
        return np.zeros(LSTM_HIDDEN), np.zeros(LSTM_HIDDEN)

    # --- forward ---

    def encode_step(
        self,
        heatmap: np.ndarray,
        augmented: np.ndarray,
        h: np.ndarray,
        c: np.ndarray,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, tuple]:
        """One encoder application: returns (embedding, h', c', cache)."""
        if heatmap.shape != (self.grid.ny, self.grid.nx):
            raise ValueError(
                f"heatmap shape {heatmap.shape} != grid ({self.grid.ny}, {self.grid.nx})"
            )
        x = np.stack([heatmap, augmented])
        stage_caches = []
        for i in range(len(self.conv_stages)):
            pre, conv_cache = conv2d(x, self.params[f"encoder.conv{i + 1}.k"])
            act = sigmoid(pre)
            x, pool_cache = maxpool2(act)
            stage_caches.append((conv_cache, act, pool_cache))
        pooled_shape = x.shape
        flat = x.reshape(-1)
        enc_out, enc_caches = mlp_forward(flat, self._enc_layers(), output_sigmoid=True)
        y, h_new, c_new, lstm_cache = lstm_cell(
            enc_out,
            h,
            c,
            self.params["encoder.lstm.wx"],
            self.params["encoder.lstm.wh"],
            self.params["encoder.lstm.b"],
        )
        embedding, post_caches = mlp_forward(y, self._post_layers())
        cache = (stage_caches, pooled_shape, enc_caches, lstm_cache, post_caches)
        return embedding, h_new, c_new, cache

    def heads(self, xp: np.ndarray) -> tuple[np.ndarray, np.ndarray, float, tuple]:
        """Actor and critic heads: (mu, raw_sigma, value, cache)."""
        actor_out, actor_caches = mlp_forward(xp, self._actor_layers())
        value_out, critic_caches = mlp_forward(xp, self._critic_layers())
        return (
            actor_out[:ACTION_DIM],
            actor_out[ACTION_DIM:],
            float(value_out[0]),
            (actor_caches, critic_caches),
        )

    def sigma_of(self, raw_sigma: np.ndarray) -> np.ndarray:
        return softplus(raw_sigma) + self.sigma_floor

    def act(
        self,
        xp: np.ndarray,
        rng: np.random.Generator | None = None,
        deterministic: bool = False,
    ) -> tuple[np.ndarray, float, float]:
        """Sample (or take the mean) action with its log-density and value.

        The log-density is of the unclamped Gaussian; callers clamp the
        action into the unit box before handing it to the environment.
        """
        mu, raw_sigma, value, _ = self.heads(xp)
        sigma = self.sigma_of(raw_sigma)
        if deterministic:
            action = mu.copy()
        else:
            if rng is None:
                raise ValueError("stochastic action requires an rng")
            action = mu + sigma * rng.standard_normal(ACTION_DIM)
        return action, gaussian_log_prob(action, mu, sigma), value

    # --- backward ---

    def heads_backward(
        self,
        d_mu: np.ndarray,
        d_raw_sigma: np.ndarray,
        d_value: float,
        cache: tuple,
        grads: Grads,
    ) -> np.ndarray:
        """Accumulate head gradients; returns the gradient w.r.t. the input."""
        actor_caches, critic_caches = cache
        d_actor_out = np.concatenate([d_mu, d_raw_sigma])
        d_xp_a, actor_grads = mlp_backward(d_actor_out, self._actor_layers(), actor_caches)
        d_xp_c, critic_grads = mlp_backward(
            np.array([d_value]), self._critic_layers(), critic_caches
        )
        for i, (dw, db) in enumerate(actor_grads, start=1):
            grads[f"actor.fc{i}.w"] += dw
            grads[f"actor.fc{i}.b"] += db
        for i, (dw, db) in enumerate(critic_grads, start=1):
            grads[f"critic.fc{i}.w"] += dw
            grads[f"critic.fc{i}.b"] += db
        return d_xp_a + d_xp_c

    def encode_backward(
        self,
        d_embedding: np.ndarray,
        dh_next: np.ndarray,
        dc_next: np.ndarray,
        cache: tuple,
        grads: Grads,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Backprop one encoder step; returns recurrent gradients for t-1."""
        stage_caches, pooled_shape, enc_caches, lstm_cache, post_caches = cache
        d_y, post_grads = mlp_backward(d_embedding, self._post_layers(), post_caches)
        for i, (dw, db) in enumerate(post_grads, start=1):
            grads[f"encoder.post{i}.w"] += dw
            grads[f"encoder.post{i}.b"] += db
        # the LSTM output feeds both the post block (d_y) and the next step
        d_enc_out, dh_prev, dc_prev, dwx, dwh, db = lstm_cell_backward(
            d_y + dh_next,
            dc_next,
            lstm_cache,
            self.params["encoder.lstm.wx"],
            self.params["encoder.lstm.wh"],
        )
        grads["encoder.lstm.wx"] += dwx
        grads["encoder.lstm.wh"] += dwh
        grads["encoder.lstm.b"] += db
        d_flat, enc_grads = mlp_backward(d_enc_out, self._enc_layers(), enc_caches)
        for i, (dw, db_) in enumerate(enc_grads, start=1):
            grads[f"encoder.fc{i}.w"] += dw
            grads[f"encoder.fc{i}.b"] += db_
        d_x = d_flat.reshape(pooled_shape)
        for i in range(len(stage_caches) - 1, -1, -1):
            conv_cache, act, pool_cache = stage_caches[i]
            d_act = maxpool2_backward(d_x, pool_cache)
            d_pre = d_act * sigmoid_grad(act)
            d_x, dk = conv2d_backward(d_pre, conv_cache)
            grads[f"encoder.conv{i + 1}.k"] += dk
        return dh_prev, dc_prev

    def zero_grads(self) -> Grads:
        return {name: np.zeros_like(arr) for name, arr in self.params.items()}


# --- checkpoint format ---
# magic, then one record per named array (u16 name length, name bytes, u8
# rank, u32 dims, f64 little-endian values); optimizer moments follow under
# names suffixed ".m"/".v"; an u64 step counter closes the file.


def _pack_record(name: str, arr: np.ndarray) -> bytes:
    encoded = name.encode("utf-8")
    arr = np.ascontiguousarray(arr, dtype="<f8")
    parts = [struct.pack("<H", len(encoded)), encoded, struct.pack("<B", arr.ndim)]
    parts.extend(struct.pack("<I", d) for d in arr.shape)
    parts.append(arr.tobytes())
    return b"".join(parts)


def save_checkpoint(path: str, params: Params, opt_state: AdamState | None = None) -> None:
    """Atomic write: the previous checkpoint survives any failure."""
    chunks = [CHECKPOINT_MAGIC]
    for name, arr in params.items():
        chunks.append(_pack_record(name, arr))
    count = 0
    if opt_state is not None:
        count = opt_state.count
        for name in params:
            if name in opt_state.m:
                chunks.append(_pack_record(name + ".m", opt_state.m[name]))
                chunks.append(_pack_record(name + ".v", opt_state.v[name]))
    chunks.append(struct.pack("<Q", count))
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(b"".join(chunks))
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def load_checkpoint(path: str) -> tuple[Params, AdamState]:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path} is not a policy checkpoint")
    pos = len(CHECKPOINT_MAGIC)
    records: dict[str, np.ndarray] = {}
    end = len(data) - 8
    while pos < end:
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (rank,) = struct.unpack_from("<B", data, pos)
        pos += 1
        dims = struct.unpack_from(f"<{rank}I", data, pos)
        pos += 4 * rank
        n_values = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(data, dtype="<f8", count=n_values, offset=pos).reshape(dims)
        pos += 8 * n_values
        records[name] = arr.astype(float)
    if pos != end:
        raise ValueError(f"{path} is truncated or malformed")
    (count,) = struct.unpack_from("<Q", data, end)
    params: Params = {}
    state = AdamState(count=count)
    for name, arr in records.items():
        if name.endswith(".m"):
            state.m[name[:-2]] = arr
        elif name.endswith(".v"):
            state.v[name[:-2]] = arr
        else:
            params[name] = arr
    return params, state
