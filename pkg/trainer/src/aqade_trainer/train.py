"""Training loop and gradient verification for the inception-style CAE.

The recipe: Adam on mean squared reconstruction error with an L2 penalty on
the conv kernels, and a two-phase learning-rate schedule (a searching phase
at 1e-4 followed by a fine-tuning phase at 1e-5). Grayscale sets train
100+50 epochs, CIFAR sets 250+100, batch size 200.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from .model import InceptionCAE

DEFAULT_EPOCHS = {
    "mnist": (100, 50),
    "fashion-mnist": (100, 50),
    "cifar10": (250, 100),
    "cifar100-coarse": (250, 100),
}


@dataclass
class TrainConfig:
    dataset: str = "mnist"
    normal_class: int = 0
    lr_phase1: float = 1e-4
    lr_phase2: float = 1e-5
    epochs_phase1: int | None = None  # None: per-dataset default
    epochs_phase2: int | None = None
    batch_size: int = 200
    weight_decay: float = 1e-6
    alpha: float = 0.1
    bn_eps: float = 1e-3
    seed: int = 0
    gap_in_training: bool = False

    def __post_init__(self):
        default1, default2 = DEFAULT_EPOCHS.get(self.dataset, (100, 50))
        if self.epochs_phase1 is None:
            self.epochs_phase1 = default1
        if self.epochs_phase2 is None:
            self.epochs_phase2 = default2
        if self.epochs_phase1 < 1 or self.epochs_phase2 < 0:
            raise ValueError("epoch counts must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


def _ensure_finite(loss: torch.Tensor, epoch: int, step: int) -> None:
    if not torch.isfinite(loss):
        raise RuntimeError(
            f"training diverged: non-finite loss at epoch {epoch}, step {step}"
        )


def _kernel_penalty(model: InceptionCAE) -> torch.Tensor:
    # weight decay as an explicit L2 term on conv kernels
    acc = None
    for name, p in model.named_parameters():
        if name.endswith("conv.weight") or name == "final.weight":
            term = p.pow(2).sum()
            acc = term if acc is None else acc + term
    return acc


def train_inception_cae(
    cfg: TrainConfig,
    train_images: np.ndarray,
    log=None,
) -> tuple[InceptionCAE, list[float]]:
    """Train on NHWC [0,1] images; returns the model and per-epoch MSE."""
    if train_images.ndim != 4:
        raise ValueError("train_images must be N x H x W x C")
    n, h, w, channels = train_images.shape
    torch.manual_seed(cfg.seed)
    model = InceptionCAE(
        n_channels=channels,
        alpha=cfg.alpha,
        bn_eps=cfg.bn_eps,
        gap_in_training=cfg.gap_in_training,
        input_size=h,
    )
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr_phase1)
    x_all = torch.from_numpy(
        np.ascontiguousarray(train_images, dtype=np.float32)
    ).permute(0, 3, 1, 2)
    shuffler = torch.Generator().manual_seed(cfg.seed)

    total_epochs = cfg.epochs_phase1 + cfg.epochs_phase2
    history: list[float] = []
    model.train()
    for epoch in range(total_epochs):
        if epoch == cfg.epochs_phase1:
            for group in optimizer.param_groups:
                group["lr"] = cfg.lr_phase2
        perm = torch.randperm(n, generator=shuffler)
        epoch_mse = 0.0
        for step, start in enumerate(range(0, n, cfg.batch_size)):
            xb = x_all[perm[start : start + cfg.batch_size]]
            optimizer.zero_grad()
            mse = F.mse_loss(model(xb), xb)
            loss = mse + cfg.weight_decay * _kernel_penalty(model)
            _ensure_finite(loss, epoch, step)
            loss.backward()
            optimizer.step()
            epoch_mse += float(mse.detach()) * len(xb)
        history.append(epoch_mse / n)
        if log is not None:
            log(f"epoch {epoch + 1}/{total_epochs}: mse {history[-1]:.6f}")
    return model, history


def tiny_model(seed: int = 0) -> tuple[InceptionCAE, torch.Tensor]:
    """Small double-precision model + input batch for gradient checking."""
    torch.manual_seed(seed)
    model = InceptionCAE(n_channels=1, widths=(2,), input_size=8).double()
    x = torch.rand(4, 1, 8, 8, generator=torch.Generator().manual_seed(seed + 1),
                   dtype=torch.float64)
    return model, x


def gradient_check(seed: int = 0, h: float = 1e-3, n_params: int = 100) -> float:
    """Max relative error between autograd and central finite differences.

    Probes at least `n_params` randomly chosen scalar parameters of a tiny
    float64 model; the loss is the mean squared reconstruction error on a
    fixed random batch (batch-norm in training mode, as during training).

    The loss surface is only piecewise smooth (max pooling, leaky ReLU), and
    a finite difference spanning a kink does not estimate the derivative at
    the base point, so such probes verify nothing. Each probe therefore also
    takes a half-step difference; parameters where the two step sizes
    disagree beyond the smooth O(h^2) truncation level sit on a kink and are
    replaced by a fresh draw.
    """
    model, x = tiny_model(seed)
    model.train()

    def loss_value() -> float:
        with torch.no_grad():
            return float(F.mse_loss(model(x), x))

    loss = F.mse_loss(model(x), x)
    model.zero_grad()
    loss.backward()

    params = [p for p in model.parameters() if p.requires_grad]
    sizes = [p.numel() for p in params]
    total = sum(sizes)
    rng = np.random.default_rng(seed + 2)
    order = rng.permutation(total)

    def central_diff(flat: torch.Tensor, idx: int, orig: float, step: float) -> float:
        with torch.no_grad():
            flat[idx] = orig + step
            up = loss_value()
            flat[idx] = orig - step
            down = loss_value()
            flat[idx] = orig
        return (up - down) / (2.0 * step)

    worst = 0.0
    checked = 0
    for flat_index in order:
        if checked >= n_params:
            break
        pi = 0
        flat_index = int(flat_index)
        while flat_index >= sizes[pi]:
            flat_index -= sizes[pi]
            pi += 1
        p = params[pi]
        flat = p.reshape(-1)
        orig = float(flat.detach()[flat_index])
        numeric = central_diff(flat, flat_index, orig, h)
        numeric_half = central_diff(flat, flat_index, orig, h / 2.0)
        scale = max(abs(numeric), abs(numeric_half), 1e-6)
        if abs(numeric - numeric_half) > 1e-4 * scale:
            continue  # kink inside the probed interval
        analytic = float(p.grad.reshape(-1)[flat_index])
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
        worst = max(worst, rel)
        checked += 1
    if checked < n_params:
        raise RuntimeError(
            f"only {checked} smooth probe points found (need {n_params})"
        )
    return worst
