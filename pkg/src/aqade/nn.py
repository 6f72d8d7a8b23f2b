"""Dense-tensor forward-pass primitives for the convolutional autoencoder.

Tensors are plain float32 numpy arrays: rank-3 feature maps are H x W x C,
rank-4 batches are N x H x W x C. All operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConvParams",
    "BatchNormParams",
    "validate_tensor",
    "conv2d",
    "batchnorm_infer",
    "leaky_relu",
    "maxpool2",
    "maxpool_same",
    "upsample2",
    "sigmoid",
    "concat_channels",
    "global_avg_pool",
]

MAX_RANK = 4

# Open-interval float32 bounds used to keep sigmoid outputs inside (0, 1).
_F32_BELOW_ONE = np.float32(np.nextafter(np.float32(1.0), np.float32(0.0)))
_F32_ABOVE_ZERO = np.float32(np.nextafter(np.float32(0.0), np.float32(1.0)))


def validate_tensor(x: np.ndarray, rank: int | None = None) -> np.ndarray:
    """Check rank 1..4, positive dims and float32 dtype; returns the array."""
    x = np.asarray(x)
    if x.ndim < 1 or x.ndim > MAX_RANK:
        raise ValueError(f"tensor rank must be 1..{MAX_RANK}, got {x.ndim}")
    if rank is not None and x.ndim != rank:
        raise ValueError(f"expected rank-{rank} tensor, got rank {x.ndim}")
    if any(d < 1 for d in x.shape):
        raise ValueError(f"all dims must be >= 1, got shape {x.shape}")
    if x.dtype != np.float32:
        raise ValueError(f"expected float32 tensor, got {x.dtype}")
    return x


@dataclass(frozen=True)
class ConvParams:
    """Same-padded stride-1 convolution weights: kernel Kh x Kw x Cin x Cout."""

    kernel: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        k = validate_tensor(self.kernel, rank=4)
        b = validate_tensor(self.bias, rank=1)
        kh, kw, _, cout = k.shape
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {kh}x{kw}")
        if b.shape[0] != cout:
            raise ValueError(f"bias length {b.shape[0]} != Cout {cout}")

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[2]

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[3]


@dataclass(frozen=True)
class BatchNormParams:
    """Inference-time batch-norm statistics, one value per channel."""

    gamma: np.ndarray
    beta: np.ndarray
    moving_mean: np.ndarray
    moving_var: np.ndarray
    epsilon: float

    def __post_init__(self):
        vecs = (self.gamma, self.beta, self.moving_mean, self.moving_var)
        for v in vecs:
            validate_tensor(v, rank=1)
        c = self.gamma.shape[0]
        if any(v.shape[0] != c for v in vecs):
            raise ValueError("batch-norm vectors must share one channel count")
        if np.any(self.moving_var < 0):
            raise ValueError("moving_var must be non-negative")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]


def conv2d(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """Stride-1 convolution with same zero padding; H x W x Cin -> H x W x Cout."""
    x = validate_tensor(x, rank=3)
    h, w, cin = x.shape
    kh, kw, kcin, cout = p.kernel.shape
    if cin != kcin:
        raise ValueError(f"input has {cin} channels, kernel expects {kcin}")
    ph, pw = kh // 2, kw // 2
    padded = np.pad(x, ((ph, ph), (pw, pw), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(0, 1))
    # windows: H x W x Cin x Kh x Kw -> patch rows ordered (dh, dw, cin)
    patches = windows.transpose(0, 1, 3, 4, 2).reshape(h * w, kh * kw * cin)
    # accumulate in float64 to bound drift, emit float32
    out = patches.astype(np.float64) @ p.kernel.reshape(-1, cout).astype(np.float64)
    out += p.bias.astype(np.float64)
    return out.reshape(h, w, cout).astype(np.float32)


def batchnorm_infer(x: np.ndarray, p: BatchNormParams) -> np.ndarray:
    """Per-channel normalization with stored statistics."""
    x = validate_tensor(x, rank=3)
    if x.shape[2] != p.channels:
        raise ValueError(f"input has {x.shape[2]} channels, params have {p.channels}")
    denom = np.sqrt(p.moving_var + np.float32(p.epsilon))
    return (p.gamma * (x - p.moving_mean) / denom + p.beta).astype(np.float32)


def leaky_relu(x: np.ndarray, alpha: float) -> np.ndarray:
    """Elementwise max(x, alpha * x)."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    x = validate_tensor(x)
    return np.maximum(x, np.float32(alpha) * x)


def maxpool2(x: np.ndarray) -> np.ndarray:
    """Non-overlapping 2x2 max pooling; spatial dims must be even."""
    x = validate_tensor(x, rank=3)
    h, w, c = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"spatial dims must be even for 2x2 pooling, got {h}x{w}")
    return x.reshape(h // 2, 2, w // 2, 2, c).max(axis=(1, 3))


def maxpool_same(x: np.ndarray, k: int = 3) -> np.ndarray:
    """Stride-1 k x k max pooling with same padding (fill = -inf)."""
    x = validate_tensor(x, rank=3)
    if k % 2 == 0 or k < 1:
        raise ValueError(f"pool window must be odd and positive, got {k}")
    pad = k // 2
    padded = np.pad(x, ((pad, pad), (pad, pad), (0, 0)), constant_values=-np.inf)
    windows = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(0, 1))
    return windows.max(axis=(3, 4)).astype(np.float32)


def upsample2(x: np.ndarray) -> np.ndarray:
    """Nearest-neighbor 2x upsampling: each pixel becomes a 2x2 block."""
    x = validate_tensor(x, rank=3)
    return np.repeat(np.repeat(x, 2, axis=0), 2, axis=1)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Elementwise logistic function, output strictly inside (0, 1)."""
    x = validate_tensor(x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    # float32 rounding can hit the closed endpoints for |x| > ~17; keep the
    # documented open interval
    return np.clip(out, _F32_ABOVE_ZERO, _F32_BELOW_ONE)


def concat_channels(xs: list[np.ndarray]) -> np.ndarray:
    """Concatenate rank-3 tensors along the channel axis, in argument order."""
    if not xs:
        raise ValueError("need at least one tensor to concatenate")
    xs = [validate_tensor(x, rank=3) for x in xs]
    h, w = xs[0].shape[:2]
    for i, x in enumerate(xs):
        if x.shape[:2] != (h, w):
            raise ValueError(
                f"spatial mismatch at input {i}: {x.shape[:2]} vs {(h, w)}"
            )
    return np.concatenate(xs, axis=2)


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    """Per-channel spatial mean: H x W x C -> C."""
    x = validate_tensor(x, rank=3)
    return x.mean(axis=(0, 1), dtype=np.float64).astype(np.float32)
