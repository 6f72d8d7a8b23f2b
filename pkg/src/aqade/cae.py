"""Inception-style convolutional autoencoder: assembly and forward passes.

The network is three encoder stages (inception block + 2x2 max pool), three
decoder stages (inception block + 2x upsample) and a final same-padded
convolution with a sigmoid. Each inception block runs four parallel branches
(1x1 conv, 3x3 conv, 5x5 conv, 3x3 same-pad max pool followed by a 1x1 conv),
every branch conv followed by batch norm and a leaky ReLU, and concatenates
the branch outputs along channels. The learned image representation is the
global average pool of the encoder output.

Weights are bound from a flat name -> float32 array mapping using the
canonical names produced by `required_weight_names`.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .nn import (
    BatchNormParams,
    ConvParams,
    batchnorm_infer,
    concat_channels,
    conv2d,
    global_avg_pool,
    leaky_relu,
    maxpool2,
    maxpool_same,
    sigmoid,
    upsample2,
    validate_tensor,
)

__all__ = [
    "BRANCHES",
    "ModelSpec",
    "Model",
    "required_weight_names",
    "build_model",
    "inception_layer",
    "forward",
    "forward_stages",
    "extract_representation",
    "extract_batch",
    "reconstruction_error",
    "random_weights",
]

# branch name -> conv kernel size; concatenation follows this order
BRANCHES = (("b1x1", 1), ("b3x3", 3), ("b5x5", 5), ("bpool", 1))

_BN_FIELDS = ("gamma", "beta", "mean", "var")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description; defaults reproduce the 32x32 network."""

    n_channels: int = 3
    input_height: int = 32
    input_width: int = 32
    encoder_widths: tuple[int, ...] = (8, 16, 32)
    decoder_widths: tuple[int, ...] = (32, 16, 8)

    def __post_init__(self):
        if self.n_channels not in (1, 3):
            raise ValueError(f"n_channels must be 1 or 3, got {self.n_channels}")
        if len(self.encoder_widths) != len(self.decoder_widths):
            raise ValueError("encoder and decoder must have the same depth")
        depth = len(self.encoder_widths)
        if self.input_height % (2**depth) or self.input_width % (2**depth):
            raise ValueError("input dims must be divisible by 2^depth")

    @property
    def representation_dim(self) -> int:
        return 4 * self.encoder_widths[-1]

    def stage_channels(self) -> list[tuple[str, int, int]]:
        """(stage name, input channels, branch width) for every inception stage."""
        stages = []
        cin = self.n_channels
        for i, n in enumerate(self.encoder_widths):
            stages.append((f"enc{i + 1}", cin, n))
            cin = 4 * n
        for i, n in enumerate(self.decoder_widths):
            stages.append((f"dec{i + 1}", cin, n))
            cin = 4 * n
        return stages


@dataclass(frozen=True)
class BranchParams:
    conv: ConvParams
    bn: BatchNormParams


@dataclass
class Model:
    """Bound, validated network; immutable after `build_model`."""

    spec: ModelSpec
    alpha: float
    stages: list[tuple[str, tuple[BranchParams, ...]]] = field(repr=False)
    final_conv: ConvParams = field(repr=False)


def required_weight_names(spec: ModelSpec) -> list[str]:
    """Canonical parameter names a weight container must provide."""
    names = []
    for stage, _, _ in spec.stage_channels():
        for branch, _ in BRANCHES:
            names.append(f"{stage}.{branch}.conv.w")
            names.append(f"{stage}.{branch}.conv.b")
            for f in _BN_FIELDS:
                names.append(f"{stage}.{branch}.bn.{f}")
    names += ["final.conv.w", "final.conv.b"]
    names += ["meta.bn_epsilon", "meta.alpha", "meta.n_channels"]
    return names


def _scalar(weights: Mapping[str, np.ndarray], name: str) -> float:
    v = np.asarray(weights[name]).reshape(-1)
    if v.size != 1:
        raise ValueError(f"scalar entry {name!r} must hold exactly one value")
    return float(v[0])


def build_model(spec: ModelSpec, weights: Mapping[str, np.ndarray]) -> Model:
    """Bind a weight container to the architecture, checking every shape."""
    missing = [n for n in required_weight_names(spec) if n not in weights]
    if missing:
        raise KeyError(f"weight container is missing entries: {missing[:5]}"
                       + ("..." if len(missing) > 5 else ""))
    for name, arr in weights.items():
        if not np.all(np.isfinite(np.asarray(arr, dtype=np.float32))):
            raise ValueError(f"non-finite values in weight entry {name!r}")

    n_channels = int(_scalar(weights, "meta.n_channels"))
    if n_channels != spec.n_channels:
        raise ValueError(
            f"container was exported for {n_channels} channels, "
            f"spec wants {spec.n_channels}"
        )
    epsilon = _scalar(weights, "meta.bn_epsilon")
    alpha = _scalar(weights, "meta.alpha")

    def get(name: str, shape: tuple[int, ...]) -> np.ndarray:
        arr = validate_tensor(np.asarray(weights[name], dtype=np.float32))
        if arr.shape != shape:
            raise ValueError(f"{name}: expected shape {shape}, got {arr.shape}")
        return arr

    stages = []
    for stage, cin, n in spec.stage_channels():
        branches = []
        for branch, ksize in BRANCHES:
            prefix = f"{stage}.{branch}"
            conv = ConvParams(
                kernel=get(f"{prefix}.conv.w", (ksize, ksize, cin, n)),
                bias=get(f"{prefix}.conv.b", (n,)),
            )
            bn = BatchNormParams(
                gamma=get(f"{prefix}.bn.gamma", (n,)),
                beta=get(f"{prefix}.bn.beta", (n,)),
                moving_mean=get(f"{prefix}.bn.mean", (n,)),
                moving_var=get(f"{prefix}.bn.var", (n,)),
                epsilon=epsilon,
            )
            branches.append(BranchParams(conv, bn))
        stages.append((stage, tuple(branches)))

    fk = validate_tensor(np.asarray(weights["final.conv.w"], dtype=np.float32))
    cin_final = 4 * spec.decoder_widths[-1]
    if fk.ndim != 4 or fk.shape[2] != cin_final or fk.shape[3] != spec.n_channels:
        raise ValueError(
            f"final.conv.w: expected Kh x Kw x {cin_final} x {spec.n_channels}, "
            f"got {fk.shape}"
        )
    final_conv = ConvParams(kernel=fk, bias=get("final.conv.b", (spec.n_channels,)))
    return Model(spec=spec, alpha=alpha, stages=stages, final_conv=final_conv)


def inception_layer(
    x: np.ndarray, branches: tuple[BranchParams, ...], alpha: float
) -> np.ndarray:
    """Four-branch block; output has 4n channels for branch width n."""
    if len(branches) != len(BRANCHES):
        raise ValueError(f"expected {len(BRANCHES)} branches, got {len(branches)}")
    widths = {b.conv.out_channels for b in branches}
    if len(widths) != 1:
        raise ValueError(f"branch widths must all be equal, got {sorted(widths)}")
    outs = []
    for (name, _), params in zip(BRANCHES, branches):
        src = maxpool_same(x, 3) if name == "bpool" else x
        y = conv2d(src, params.conv)
        y = batchnorm_infer(y, params.bn)
        outs.append(leaky_relu(y, alpha))
    return concat_channels(outs)


def _check_input(model: Model, image: np.ndarray) -> np.ndarray:
    image = validate_tensor(image, rank=3)
    spec = model.spec
    want = (spec.input_height, spec.input_width, spec.n_channels)
    if image.shape != want:
        raise ValueError(f"expected input {want}, got {image.shape}")
    return image


def forward_stages(model: Model, image: np.ndarray) -> list[tuple[str, np.ndarray]]:
    """Full forward pass returning every stage output, final stage last."""
    x = _check_input(model, image)
    depth = len(model.spec.encoder_widths)
    trace = []
    for i, (name, branches) in enumerate(model.stages):
        x = inception_layer(x, branches, model.alpha)
        x = maxpool2(x) if i < depth else upsample2(x)
        trace.append((name, x))
    x = sigmoid(conv2d(x, model.final_conv))
    trace.append(("final", x))
    return trace


def forward(model: Model, image: np.ndarray) -> np.ndarray:
    """Reconstruct an image; output has the input shape, values in (0, 1)."""
    return forward_stages(model, image)[-1][1]


def extract_representation(model: Model, image: np.ndarray) -> np.ndarray:
    """Global average pool of the encoder output; decoder is not executed."""
    x = _check_input(model, image)
    depth = len(model.spec.encoder_widths)
    for _, branches in model.stages[:depth]:
        x = maxpool2(inception_layer(x, branches, model.alpha))
    return global_avg_pool(x)


def extract_batch(model: Model, images: np.ndarray, threads: int = 1) -> np.ndarray:
    """Row i of the result is extract_representation(images[i])."""
    images = validate_tensor(images, rank=4)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda im: extract_representation(model, im), images))
    else:
        rows = [extract_representation(model, im) for im in images]
    return np.stack(rows)


def reconstruction_error(model: Model, image: np.ndarray) -> float:
    """Mean squared error between an image and its reconstruction."""
    image = _check_input(model, image)
    diff = (image - forward(model, image)).astype(np.float64)
    return float(np.mean(diff * diff))


def random_weights(
    spec: ModelSpec,
    seed: int = 0,
    bn_epsilon: float = 1e-3,
    alpha: float = 0.1,
    final_kernel: int = 3,
) -> dict[str, np.ndarray]:
    """Randomly initialized weight container (for tests and demos)."""
    rng = np.random.default_rng(seed)
    out: dict[str, np.ndarray] = {}

    def kernel(kh, kw, cin, cout):
        scale = 1.0 / np.sqrt(kh * kw * cin)
        return (rng.standard_normal((kh, kw, cin, cout)) * scale).astype(np.float32)

    for stage, cin, n in spec.stage_channels():
        for branch, ksize in BRANCHES:
            prefix = f"{stage}.{branch}"
            out[f"{prefix}.conv.w"] = kernel(ksize, ksize, cin, n)
            out[f"{prefix}.conv.b"] = np.zeros(n, dtype=np.float32)
            out[f"{prefix}.bn.gamma"] = np.ones(n, dtype=np.float32)
            out[f"{prefix}.bn.beta"] = np.zeros(n, dtype=np.float32)
            out[f"{prefix}.bn.mean"] = np.zeros(n, dtype=np.float32)
            out[f"{prefix}.bn.var"] = np.ones(n, dtype=np.float32)
    cin_final = 4 * spec.decoder_widths[-1]
    out["final.conv.w"] = kernel(final_kernel, final_kernel, cin_final, spec.n_channels)
    out["final.conv.b"] = np.zeros(spec.n_channels, dtype=np.float32)
    out["meta.bn_epsilon"] = np.array([bn_epsilon], dtype=np.float32)
    out["meta.alpha"] = np.array([alpha], dtype=np.float32)
    out["meta.n_channels"] = np.array([spec.n_channels], dtype=np.float32)
    return out
