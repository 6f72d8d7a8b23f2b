"""Torch implementation of the inception-style convolutional autoencoder.

Mirrors the inference engine's topology exactly so exported weights bind
cleanly: four parallel branches per block (1x1 / 3x3 / 5x5 convs and a
3x3 stride-1 max pool followed by a 1x1 conv), each conv -> batch norm ->
leaky ReLU, channel concatenation in that branch order; 2x2 max pooling
between encoder stages, nearest-neighbor 2x upsampling between decoder
stages, and a final same-padded conv with sigmoid (no batch norm).

Layout is NCHW internally; the export module transposes to the engine's
HWC / KhKwCinCout conventions.
"""

from __future__ import annotations

import torch
from torch import nn

BRANCH_KERNELS = (("b1x1", 1), ("b3x3", 3), ("b5x5", 5), ("bpool", 1))


class Branch(nn.Module):
    def __init__(self, cin: int, n: int, ksize: int, alpha: float, bn_eps: float,
                 pooled: bool):
        super().__init__()
        self.pool = nn.MaxPool2d(3, stride=1, padding=1) if pooled else None
        self.conv = nn.Conv2d(cin, n, ksize, padding="same")
        self.bn = nn.BatchNorm2d(n, eps=bn_eps)
        self.act = nn.LeakyReLU(alpha)

    def forward(self, x):
        if self.pool is not None:
            x = self.pool(x)
        return self.act(self.bn(self.conv(x)))


class InceptionBlock(nn.Module):
    """Four-branch block; output channels = 4 * n."""

    def __init__(self, cin: int, n: int, alpha: float, bn_eps: float):
        super().__init__()
        for name, ksize in BRANCH_KERNELS:
            self.add_module(
                name, Branch(cin, n, ksize, alpha, bn_eps, pooled=name == "bpool")
            )

    def forward(self, x):
        return torch.cat([getattr(self, name)(x) for name, _ in BRANCH_KERNELS], dim=1)


class InceptionCAE(nn.Module):
    def __init__(
        self,
        n_channels: int = 3,
        widths: tuple[int, ...] = (8, 16, 32),
        alpha: float = 0.1,
        bn_eps: float = 1e-3,
        final_kernel: int = 3,
        gap_in_training: bool = False,
        input_size: int = 32,
    ):
        super().__init__()
        self.n_channels = n_channels
        self.widths = tuple(widths)
        self.alpha = alpha
        self.bn_eps = bn_eps
        self.gap_in_training = gap_in_training
        self.input_size = input_size
        self.bottleneck_size = input_size // (2 ** len(widths))
        self.representation_dim = 4 * widths[-1]

        cin = n_channels
        self.encoder = nn.ModuleList()
        for n in widths:
            self.encoder.append(InceptionBlock(cin, n, alpha, bn_eps))
            cin = 4 * n
        self.downsample = nn.MaxPool2d(2)

        self.decoder = nn.ModuleList()
        for n in reversed(widths):
            self.decoder.append(InceptionBlock(cin, n, alpha, bn_eps))
            cin = 4 * n
        self.upsample = nn.Upsample(scale_factor=2, mode="nearest")
        self.final = nn.Conv2d(cin, n_channels, final_kernel, padding="same")

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        """N x C x H x W -> bottleneck N x 4*widths[-1] x h x h."""
        for block in self.encoder:
            x = self.downsample(block(x))
        return x

    def embed(self, x: torch.Tensor) -> torch.Tensor:
        """Global average pool of the bottleneck: N x representation_dim."""
        return self.encode(x).mean(dim=(2, 3))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        z = self.encode(x)
        if self.gap_in_training:
            # squeeze through the pooled vector, then re-inflate spatially
            vec = z.mean(dim=(2, 3))
            z = vec[:, :, None, None].expand(
                -1, -1, self.bottleneck_size, self.bottleneck_size
            ).contiguous()
        for block in self.decoder:
            z = self.upsample(block(z))
        return torch.sigmoid(self.final(z))
