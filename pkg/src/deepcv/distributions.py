"""Gaussian latent statistics, reparameterized sampling and closed-form KL maps.

Latent tensors use the channel-first layout (..., d, H, W). All covariances are diagonal.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import torch

from .config import DeepCVConfig
from .exceptions import DimensionMismatchError, InvalidInputError
from .models import GaussianPrior


@dataclass(frozen=True)
class LatentStats:
    """Per-pixel posterior q(Z | I): mean and diagonal variance fields.

    Attributes:
        mean: Tensor (..., d, H, W)
        variance: Tensor (..., d, H, W), strictly positive
    """

    mean: torch.Tensor
    variance: torch.Tensor

    def __post_init__(self) -> None:
        if self.mean.shape != self.variance.shape:
            raise DimensionMismatchError(
                "latent stats shape", tuple(self.mean.shape), tuple(self.variance.shape)
            )
        if self.mean.dim() < 3:
            raise InvalidInputError(
                f"Latent stats must be shaped (..., d, H, W), got {tuple(self.mean.shape)}"
            )

    @property
    def d(self) -> int:
        return int(self.mean.shape[-3])

    @property
    def spatial(self) -> tuple[int, int]:
        return (int(self.mean.shape[-2]), int(self.mean.shape[-1]))

    @classmethod
    def unit_variance(cls, mean: torch.Tensor) -> LatentStats:
        """Stats with variance ≡ 1 (the reduced encoder)."""
        return cls(mean=mean, variance=torch.ones_like(mean))


def make_generator(seed: int, device: torch.device | str = "cpu") -> torch.Generator:
    """Dedicated random stream; nothing in the package draws from torch's global RNG."""
    generator = torch.Generator(device=device)
    _ = generator.manual_seed(seed)
    return generator


def _check_dim(stats: LatentStats, prior: GaussianPrior) -> None:
    if prior.d != stats.d:
        raise DimensionMismatchError("latent dimension", prior.d, stats.d)


def kl_map(stats: LatentStats, prior: GaussianPrior) -> torch.Tensor:
    """KL(q_x ‖ N(μ, Σ)) at every pixel, shaped (..., H, W).

    Diagonal closed form ½ Σ_k [ln(Σ_k / s_k) − 1 + s_k / Σ_k + (m_k − μ_k)² / Σ_k].

    Raises:
        DimensionMismatchError: If prior.d differs from the latent dimension
    """
    _check_dim(stats, prior)
    mu, sigma = prior.tensors(dtype=stats.mean.dtype, device=stats.mean.device)
    var = torch.clamp(stats.variance, min=DeepCVConfig.VARIANCE_FLOOR)
    per_dim = torch.log(sigma) - torch.log(var) - 1.0 + var / sigma + (stats.mean - mu) ** 2 / sigma
    return 0.5 * per_dim.sum(dim=-3)


def kl_pointwise(stats: LatentStats, x: tuple[int, int], prior: GaussianPrior) -> torch.Tensor:
    """KL divergence at one pixel ``x = (row, col)``; leading batch dimensions are kept."""
    row, col = x
    height, width = stats.spatial
    if not (0 <= row < height and 0 <= col < width):
        raise InvalidInputError(f"Pixel {x} outside the {height}×{width} latent field")
    return kl_map(stats, prior)[..., row, col]


def kl_field(
    stats: LatentStats, prior_fg: GaussianPrior, prior_bg: GaussianPrior
) -> tuple[torch.Tensor, torch.Tensor]:
    """Foreground and background KL maps."""
    return kl_map(stats, prior_fg), kl_map(stats, prior_bg)


def kl_fields(stats: LatentStats, priors: Sequence[GaussianPrior]) -> torch.Tensor:
    """KL maps against N priors stacked as (..., N, H, W)."""
    return torch.stack([kl_map(stats, p) for p in priors], dim=-3)


def standard_normal(
    shape: Sequence[int],
    generator: torch.Generator,
    dtype: torch.dtype = torch.float32,
    device: torch.device | str = "cpu",
) -> torch.Tensor:
    return torch.randn(tuple(shape), generator=generator, dtype=dtype, device=device)


def sample_latent(
    stats: LatentStats,
    noise_seed: int | torch.Generator | None = None,
    noise: torch.Tensor | None = None,
) -> torch.Tensor:
    """Reparameterized draw Z = mean + √variance ⊙ η.

    Args:
        stats: Latent statistics
        noise_seed: Seed or generator for η (ignored when ``noise`` is given)
        noise: Explicit standard-normal draw shaped like ``stats.mean``

    Returns:
        Tensor shaped like ``stats.mean``; differentiable in mean and variance
    """
    if noise is None:
        generator = (
            noise_seed
            if isinstance(noise_seed, torch.Generator)
            else make_generator(0 if noise_seed is None else noise_seed)
        )
        noise = standard_normal(
            stats.mean.shape, generator, dtype=stats.mean.dtype, device=stats.mean.device
        )
    std = torch.sqrt(torch.clamp(stats.variance, min=DeepCVConfig.VARIANCE_FLOOR))
    return stats.mean + std * noise


def sample_prior_image(
    prior: GaussianPrior,
    height: int,
    width: int,
    seed: int | torch.Generator,
    batch: int | None = None,
    dtype: torch.dtype = torch.float32,
) -> torch.Tensor:
    """I.i.d. per-pixel draws from a region prior, shaped (d, H, W) or (batch, d, H, W)."""
    generator = seed if isinstance(seed, torch.Generator) else make_generator(seed)
    mu, sigma = prior.tensors(dtype=dtype, device=generator.device)
    shape = (prior.d, height, width) if batch is None else (batch, prior.d, height, width)
    return mu + torch.sqrt(sigma) * standard_normal(shape, generator, dtype=dtype, device=generator.device)
