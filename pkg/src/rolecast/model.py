"""From-scratch feed-forward binary classifier.

Architecture: `n_blocks` intermediate blocks (dense -> inverted dropout ->
ReLU) followed by a final dense layer producing one score per output class.
Layer widths shrink geometrically from input_dim down to output_dim.

Checkpoint file layout (integers little-endian):

    magic "ANCK" | version u16 = 1
    config JSON [len u32][bytes]
    n_layers u32, then per layer: rows u32, cols u32, W row-major, b
    adam step u64, then first/second moments in the same per-layer layout
    segment_index i32
    metrics history JSON [len u32][bytes]

Arrays are stored in the dtype named by the config (float32 by default,
float64 for the high-precision gradient-test mode), so round trips are
bit-exact either way.
"""

from __future__ import annotations

import copy
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

CHECKPOINT_MAGIC = b"ANCK"
CHECKPOINT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sH")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_I32 = struct.Struct("<i")


class ModelError(Exception):
    """Shape mismatch, divergence, or a bad checkpoint file."""


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    n_blocks: int = 2
    dropout_rate: float = 0.3
    output_dim: int = 2
    seed: int = 0
    reduction: str = "geometric"  # the only supported size schedule
    activation: str = "relu"  # the only supported nonlinearity
    dtype: str = "float32"  # "float64" enables the high-precision mode

    def __post_init__(self):
        if self.input_dim < self.output_dim:
            raise ModelError(f"input_dim {self.input_dim} < output_dim {self.output_dim}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ModelError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.reduction != "geometric":
            raise ModelError(f"unsupported reduction {self.reduction!r}")
        if self.activation != "relu":
            raise ModelError(f"unsupported activation {self.activation!r}")
        if self.dtype not in ("float32", "float64"):
            raise ModelError(f"unsupported dtype {self.dtype!r}")

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype(self.dtype)


@dataclass(frozen=True)
class AdamParams:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5))


def layer_sizes(input_dim: int, n_blocks: int, output_dim: int = 2) -> list[int]:
    """Geometric interpolation from input_dim to output_dim over n_blocks+1 layers."""
    if n_blocks < 0:
        raise ModelError(f"n_blocks must be >= 0, got {n_blocks}")
    ratio = (output_dim / input_dim) ** (1.0 / (n_blocks + 1))
    sizes = [input_dim]
    for k in range(1, n_blocks + 1):
        sizes.append(max(output_dim, _round_half_away(input_dim * ratio**k)))
    sizes.append(output_dim)
    return sizes


def parameter_count(sizes: list[int]) -> int:
    return sum(sizes[k] * sizes[k + 1] + sizes[k + 1] for k in range(len(sizes) - 1))


@dataclass
class NetworkCheckpoint:
    """Parameters plus optimizer state; training works on a private clone."""

    config: NetworkConfig
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    adam_step: int
    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]
    segment_index: int = -1
    history: list[dict] = field(default_factory=list)

    def clone(self) -> "NetworkCheckpoint":
        return copy.deepcopy(self)

    @property
    def sizes(self) -> list[int]:
        return layer_sizes(self.config.input_dim, self.config.n_blocks, self.config.output_dim)


def init_checkpoint(config: NetworkConfig) -> NetworkCheckpoint:
    """Fan-in-scaled uniform init, deterministic in config.seed."""
    sizes = layer_sizes(config.input_dim, config.n_blocks, config.output_dim)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    dtype = config.np_dtype
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return NetworkCheckpoint(
        config=config,
        weights=weights,
        biases=biases,
        adam_step=0,
        m_weights=[np.zeros_like(w) for w in weights],
        v_weights=[np.zeros_like(w) for w in weights],
        m_biases=[np.zeros_like(b) for b in biases],
        v_biases=[np.zeros_like(b) for b in biases],
    )


def _dropout_mask(shape: tuple, rate: float, dropout_seed: int, layer: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([dropout_seed, layer])))
    return (rng.random(shape) >= rate).astype(np.float64)


def forward(
    ckpt: NetworkCheckpoint,
    batch: np.ndarray,
    train_mode: bool = False,
    dropout_seed: int = 0,
) -> tuple[np.ndarray, list]:
    """Class scores (batch x output_dim) plus cached per-layer activations.

    In train mode each intermediate dense output passes through an inverted
    dropout mask derived from dropout_seed (scaled by 1/(1-rate)); eval mode
    is deterministic and dropout-free.
    """
    cfg = ckpt.config
    x = np.asarray(batch, dtype=cfg.np_dtype)
    if x.ndim != 2 or x.shape[1] != cfg.input_dim:
        raise ModelError(f"batch shape {x.shape} does not match input_dim {cfg.input_dim}")
    caches = []
    a = x
    n_layers = len(ckpt.weights)
    for k in range(n_layers - 1):
        z = a @ ckpt.weights[k] + ckpt.biases[k]
        if train_mode and cfg.dropout_rate > 0.0:
            mask = _dropout_mask(z.shape, cfg.dropout_rate, dropout_seed, k)
            scale = 1.0 / (1.0 - cfg.dropout_rate)
            h = z * (mask * scale).astype(cfg.np_dtype)
        else:
            mask = None
            h = z
        a_next = np.maximum(h, 0)
        caches.append((a, h, mask))
        a = a_next
    scores = a @ ckpt.weights[-1] + ckpt.biases[-1]
    caches.append((a, None, None))
    return scores, caches


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores.astype(np.float64) - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(
    ckpt: NetworkCheckpoint,
    batch: np.ndarray,
    labels: np.ndarray,
    train_mode: bool = False,
    dropout_seed: int = 0,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy over the batch and gradients for every parameter.

    Backpropagation runs under the same dropout masks as the forward pass.
    Returns (loss, weight gradients, bias gradients).
    """
    cfg = ckpt.config
    labels = np.asarray(labels)
    if labels.ndim != 1 or len(labels) != len(batch):
        raise ModelError(f"labels shape {labels.shape} does not match batch of {len(batch)}")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= cfg.output_dim:
        raise ModelError("labels outside [0, output_dim)")

    scores, caches = forward(ckpt, batch, train_mode=train_mode, dropout_seed=dropout_seed)
    n = len(batch)
    shifted = scores - scores.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_z[:, None]
    loss = float(-log_probs[np.arange(n), labels].mean())
    if not math.isfinite(loss):
        raise ModelError(f"non-finite loss {loss}: training diverged")

    probs = np.exp(log_probs)
    dscores = probs
    dscores[np.arange(n), labels] -= 1.0
    dscores /= n

    grad_w: list[Optional[np.ndarray]] = [None] * len(ckpt.weights)
    grad_b: list[Optional[np.ndarray]] = [None] * len(ckpt.biases)
    delta = dscores.astype(cfg.np_dtype)
    for k in range(len(ckpt.weights) - 1, -1, -1):
        a_in, h, mask = caches[k]
        grad_w[k] = a_in.T @ delta
        grad_b[k] = delta.sum(axis=0)
        if k == 0:
            break
        da = delta @ ckpt.weights[k].T
        _, h_prev, mask_prev = caches[k - 1]
        dh = da * (h_prev > 0)
        if mask_prev is not None:
            scale = 1.0 / (1.0 - cfg.dropout_rate)
            dh = dh * (mask_prev * scale).astype(cfg.np_dtype)
        delta = dh
    return loss, grad_w, grad_b  # type: ignore[return-value]


def optimizer_step(
    ckpt: NetworkCheckpoint,
    grad_w: list[np.ndarray],
    grad_b: list[np.ndarray],
    params: AdamParams = AdamParams(),
) -> NetworkCheckpoint:
    """Bias-corrected adaptive-moment update, in place on ckpt."""
    ckpt.adam_step += 1
    t = ckpt.adam_step
    b1, b2 = params.beta1, params.beta2
    correction1 = 1.0 - b1**t
    correction2 = 1.0 - b2**t
    for k in range(len(ckpt.weights)):
        for theta, g, m, v in (
            (ckpt.weights[k], grad_w[k], ckpt.m_weights[k], ckpt.v_weights[k]),
            (ckpt.biases[k], grad_b[k], ckpt.m_biases[k], ckpt.v_biases[k]),
        ):
            if g.shape != theta.shape:
                raise ModelError(f"gradient shape {g.shape} != parameter shape {theta.shape}")
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * np.square(g)
            m_hat = m / correction1
            v_hat = v / correction2
            theta -= (params.learning_rate * m_hat / (np.sqrt(v_hat) + params.eps)).astype(
                theta.dtype
            )
    return ckpt


def predict(ckpt: NetworkCheckpoint, batch: np.ndarray) -> np.ndarray:
    scores, _ = forward(ckpt, batch, train_mode=False)
    return scores.argmax(axis=1)


def predict_proba(ckpt: NetworkCheckpoint, batch: np.ndarray) -> np.ndarray:
    scores, _ = forward(ckpt, batch, train_mode=False)
    return softmax(scores)


# --- checkpoint files -------------------------------------------------------


def _write_array(fh, arr: np.ndarray) -> None:
    if arr.ndim == 1:
        fh.write(_U32.pack(1))
        fh.write(_U32.pack(arr.shape[0]))
    else:
        fh.write(_U32.pack(arr.shape[0]))
        fh.write(_U32.pack(arr.shape[1]))
    fh.write(np.ascontiguousarray(arr).tobytes())


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise ModelError(f"{self.path}: truncated checkpoint")
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]

    def i32(self) -> int:
        return _I32.unpack(self.take(4))[0]

    def array(self, dtype: np.dtype, like_1d: bool) -> np.ndarray:
        rows, cols = self.u32(), self.u32()
        raw = self.take(rows * cols * dtype.itemsize)
        arr = np.frombuffer(raw, dtype=dtype).copy()
        return arr if like_1d else arr.reshape(rows, cols)


def checkpoint_save(ckpt: NetworkCheckpoint, path: Path) -> None:
    with Path(path).open("wb") as fh:
        fh.write(_CKPT_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION))
        cfg_bytes = json.dumps(asdict(ckpt.config), sort_keys=True).encode("utf-8")
        fh.write(_U32.pack(len(cfg_bytes)))
        fh.write(cfg_bytes)
        fh.write(_U32.pack(len(ckpt.weights)))
        for group in (ckpt.weights, ckpt.biases):
            for arr in group:
                _write_array(fh, arr)
        fh.write(_U64.pack(ckpt.adam_step))
        for group in (ckpt.m_weights, ckpt.v_weights, ckpt.m_biases, ckpt.v_biases):
            for arr in group:
                _write_array(fh, arr)
        fh.write(_I32.pack(ckpt.segment_index))
        hist_bytes = json.dumps(ckpt.history, sort_keys=True).encode("utf-8")
        fh.write(_U32.pack(len(hist_bytes)))
        fh.write(hist_bytes)


def checkpoint_load(path: Path) -> NetworkCheckpoint:
    path = Path(path)
    r = _Reader(path.read_bytes(), path)
    magic, version = _CKPT_HEADER.unpack(r.take(_CKPT_HEADER.size))
    if magic != CHECKPOINT_MAGIC:
        raise ModelError(f"{path}: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise ModelError(f"{path}: unsupported checkpoint version {version}")
    config = NetworkConfig(**json.loads(r.take(r.u32()).decode("utf-8")))
    dtype = config.np_dtype
    n_layers = r.u32()
    weights = [r.array(dtype, like_1d=False) for _ in range(n_layers)]
    biases = [r.array(dtype, like_1d=True) for _ in range(n_layers)]
    adam_step = r.u64()
    m_w = [r.array(dtype, like_1d=False) for _ in range(n_layers)]
    v_w = [r.array(dtype, like_1d=False) for _ in range(n_layers)]
    m_b = [r.array(dtype, like_1d=True) for _ in range(n_layers)]
    v_b = [r.array(dtype, like_1d=True) for _ in range(n_layers)]
    segment_index = r.i32()
    history = json.loads(r.take(r.u32()).decode("utf-8"))
    if r.offset != len(r.data):
        raise ModelError(f"{path}: {len(r.data) - r.offset} trailing bytes")
    ckpt = NetworkCheckpoint(
        config=config,
        weights=weights,
        biases=biases,
        adam_step=adam_step,
        m_weights=m_w,
        v_weights=v_w,
        m_biases=m_b,
        v_biases=v_b,
        segment_index=segment_index,
        history=history,
    )
    expected = ckpt.sizes
    for k, w in enumerate(weights):
        if w.shape != (expected[k], expected[k + 1]):
            raise ModelError(f"{path}: layer {k} shape {w.shape} inconsistent with config")
    return ckpt
