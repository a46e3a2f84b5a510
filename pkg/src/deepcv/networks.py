"""Parametric maps: U-nets for the encoder G, decoder F and segmenter U, plus the discriminator D.

Also holds the mask relaxations (sigmoid / softmax) and the hard-label rules.
"""

from __future__ import annotations

from collections.abc import Iterator
from contextlib import contextmanager

import torch
import torch.nn.functional as F
from torch import nn

from .config import DeepCVConfig
from .distributions import LatentStats
from .exceptions import DimensionMismatchError, InvalidInputError
from .imagecore import LabelMask
from .models import NetworkSpec
from .types import LevelField


# ============================================================================
# Building blocks
# ============================================================================


def make_activation(name: str) -> nn.Module:
    """Activation module by name.

    Raises:
        ValueError: If the name is unknown
    """
    activations: dict[str, type[nn.Module]] = {
        "silu": nn.SiLU,
        "softplus": nn.Softplus,
        "sigmoid": nn.Sigmoid,
        "relu": nn.ReLU,
    }
    if name not in activations:
        raise ValueError(f"Unknown activation: {name}. Available: {list(activations)}")
    return activations[name]()


def _norm(kind: str, channels: int) -> nn.Module:
    return nn.InstanceNorm2d(channels, affine=True) if kind == "instance" else nn.Identity()


class DoubleConv(nn.Module):
    """(conv3×3 → norm → activation) × 2."""

    def __init__(self, in_channels: int, out_channels: int, spec: NetworkSpec) -> None:
        super().__init__()
        self.block: nn.Sequential = nn.Sequential(
            nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1),
            _norm(spec.normalization, out_channels),
            make_activation(spec.activation),
            nn.Conv2d(out_channels, out_channels, kernel_size=3, padding=1),
            _norm(spec.normalization, out_channels),
            make_activation(spec.activation),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.block(x)


class UNet(nn.Module):
    """U-net with ``depth`` halving stages, mirrored upsampling and concatenated skips.

    Each down stage halves the spatial size and doubles the channels; the bottleneck of an
    H×W input is (H / 2^depth)×(W / 2^depth). Accepts (C, H, W) or (B, C, H, W) input.
    """

    def __init__(self, spec: NetworkSpec) -> None:
        super().__init__()
        self.spec: NetworkSpec = spec
        widths = [spec.base_channels * 2**k for k in range(spec.depth + 1)]

        self.inc: DoubleConv = DoubleConv(spec.in_channels, widths[0], spec)
        self.down: nn.ModuleList = nn.ModuleList(
            DoubleConv(widths[k], widths[k + 1], spec) for k in range(spec.depth)
        )
        self.up: nn.ModuleList = nn.ModuleList(
            DoubleConv(widths[k + 1] + widths[k], widths[k], spec)
            for k in reversed(range(spec.depth))
        )
        self.outc: nn.Conv2d = nn.Conv2d(widths[0], spec.out_channels, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        unbatched = x.dim() == 3
        if unbatched:
            x = x.unsqueeze(0)
        if x.shape[1] != self.spec.in_channels:
            raise DimensionMismatchError("network input channels", self.spec.in_channels, int(x.shape[1]))
        self.spec.check_input(int(x.shape[-2]), int(x.shape[-1]))

        skips = [self.inc(x)]
        for stage in self.down:
            skips.append(stage(F.avg_pool2d(skips[-1], 2)))
        y = skips.pop()
        for stage in self.up:
            skip = skips.pop()
            y = F.interpolate(y, size=skip.shape[-2:], mode="bilinear", align_corners=False)
            y = stage(torch.cat([skip, y], dim=1))
        out = self.outc(y)
        return out.squeeze(0) if unbatched else out


def build_unet(spec: NetworkSpec, seed: int) -> UNet:
    """U-net whose initial parameters depend only on ``spec`` and ``seed``."""
    with torch.random.fork_rng(devices=[]):
        _ = torch.manual_seed(seed)
        return UNet(spec)


# ============================================================================
# Encoder G, decoder F, segmenter U
# ============================================================================


class Encoder(nn.Module):
    """G = (G^μ, G^σ): image → per-pixel latent mean and variance.

    In reduced mode the network only predicts the mean and the variance is the constant 1.
    Otherwise a second head is mapped through softplus plus a 1e-6 floor.
    """

    def __init__(self, spec: NetworkSpec, latent_dim: int, reduced_variance: bool, seed: int) -> None:
        super().__init__()
        self.latent_dim: int = latent_dim
        self.reduced_variance: bool = reduced_variance
        heads = latent_dim if reduced_variance else 2 * latent_dim
        self.net: UNet = build_unet(spec.with_io(spec.in_channels, heads), seed)

    def forward(self, image: torch.Tensor) -> LatentStats:
        out = self.net(image)
        if self.reduced_variance:
            return LatentStats.unit_variance(out)
        mean, raw = torch.split(out, self.latent_dim, dim=-3)
        return LatentStats(mean=mean, variance=F.softplus(raw) + DeepCVConfig.VARIANCE_FLOOR)


class Decoder(nn.Module):
    """F: latent field (..., d, H, W) → image-shaped field (..., C, H, W), unclamped."""

    def __init__(self, spec: NetworkSpec, latent_dim: int, image_channels: int, seed: int) -> None:
        super().__init__()
        self.net: UNet = build_unet(spec.with_io(latent_dim, image_channels), seed)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return self.net(z)


class Segmenter(nn.Module):
    """U: image → soft foreground mask in (0, 1), shaped (..., H, W)."""

    def __init__(self, spec: NetworkSpec, seed: int) -> None:
        super().__init__()
        self.net: UNet = build_unet(spec.with_io(spec.in_channels, 1), seed)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.net(image)).squeeze(-3)


def encode(encoder: Encoder, image: torch.Tensor) -> LatentStats:
    """G(I): per-pixel latent mean and variance of a (B, C, H, W) or (C, H, W) image."""
    return encoder(image)


def decode(decoder: Decoder, z: torch.Tensor) -> torch.Tensor:
    """F(Z): image-shaped reconstruction of a latent field with d channels."""
    return decoder(z)


# ============================================================================
# Discriminator D
# ============================================================================


class Discriminator(nn.Module):
    """Strided convolutions, global pooling and one fully connected layer with a sigmoid.

    Instance normalization is applied to every convolution except the first and the last.
    Input sides must be divisible by 2^len(channels). Output shape is (B,).
    """

    def __init__(self, spec: NetworkSpec, channels: tuple[int, ...]) -> None:
        super().__init__()
        if not channels:
            raise InvalidInputError("Discriminator needs at least one convolution")
        self.spec: NetworkSpec = spec.model_copy(update={"depth": len(channels)})
        layers: list[nn.Module] = []
        previous = spec.in_channels
        for k, width in enumerate(channels):
            layers.append(nn.Conv2d(previous, width, kernel_size=3, stride=2, padding=1))
            if 0 < k < len(channels) - 1:
                layers.append(nn.InstanceNorm2d(width, affine=True))
            layers.append(make_activation(spec.activation))
            previous = width
        self.features: nn.Sequential = nn.Sequential(*layers)
        self.fc: nn.Linear = nn.Linear(previous, 1)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        if image.dim() == 3:
            image = image.unsqueeze(0)
        self.spec.check_input(int(image.shape[-2]), int(image.shape[-1]))
        pooled = self.features(image).mean(dim=(-2, -1))
        return torch.sigmoid(self.fc(pooled)).squeeze(-1)


def build_discriminator(
    spec: NetworkSpec,
    seed: int,
    channels: tuple[int, ...] = DeepCVConfig.DISCRIMINATOR_CHANNELS,
) -> Discriminator:
    """Discriminator with deterministic initialization per seed."""
    with torch.random.fork_rng(devices=[]):
        _ = torch.manual_seed(seed)
        return Discriminator(spec, channels)


# ============================================================================
# Mask relaxations and hard labels
# ============================================================================


def soft_mask(phi: LevelField) -> torch.Tensor:
    """S(φ) = 1 / (1 + e^(−φ))."""
    return torch.sigmoid(phi)


def soft_masks_multi(phi: LevelField, dim: int = -3) -> torch.Tensor:
    """Per-pixel softmax over the N channels of Φ; the N masks sum to 1."""
    if phi.shape[dim] < 2:
        raise InvalidInputError(f"Multi-phase level field needs N >= 2 channels, got {phi.shape[dim]}")
    return torch.softmax(phi, dim=dim)


def binarize(phi: LevelField) -> LabelMask:
    """Hard labels from a level field.

    An H×W field gives label 1 where φ > 0 (φ = 0 is background). An N×H×W field gives the
    per-pixel argmax with ties going to the lowest index.
    """
    values = phi.detach().to("cpu")
    if values.dim() == 2:
        return LabelMask.from_bool((values > 0).numpy())
    if values.dim() == 3:
        return LabelMask(labels=torch.argmax(values, dim=0).numpy(), n_labels=int(values.shape[0]))
    raise InvalidInputError(f"Level field must be H×W or N×H×W, got {tuple(values.shape)}")


# ============================================================================
# Helpers
# ============================================================================


@contextmanager
def frozen(*modules: nn.Module) -> Iterator[None]:
    """Hold module parameters fixed; gradients still flow through their outputs."""
    saved = [(p, p.requires_grad) for m in modules for p in m.parameters()]
    for p, _ in saved:
        _ = p.requires_grad_(False)
    try:
        yield
    finally:
        for p, flag in saved:
            _ = p.requires_grad_(flag)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
