"""Objectives: classical Chan-Vese, the split single-image and multi-phase energies, and the
dataset losses (energy, augmentation invariance, discriminator and region-conservation terms).

Every function returns differentiable tensors. ``EnergyTerms.breakdown()`` converts them to the
float :class:`EnergyBreakdown` used in traces and reports.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field, fields

import torch
import torch.nn.functional as F

from .augment import Augmentation
from .config import DeepCVConfig
from .diffgeo import forward_grad, tv_norm
from .distributions import (
    LatentStats,
    kl_fields,
    make_generator,
    sample_latent,
    sample_prior_image,
    standard_normal,
)
from .exceptions import DimensionMismatchError, EmptyRegionError, InvalidInputError
from .imagecore import Image, LabelMask
from .models import GaussianPrior, Hyperparams
from .networks import (
    Decoder,
    Discriminator,
    Encoder,
    Segmenter,
    decode,
    encode,
    frozen,
    soft_mask,
    soft_masks_multi,
)
from .report_models import EnergyBreakdown
from .types import LevelField, SplitField


def _zero() -> torch.Tensor:
    return torch.zeros(())


@dataclass
class EnergyTerms:
    """Tensor-valued energy components; ``total`` sums them."""

    reconstruction: torch.Tensor = field(default_factory=_zero)
    kl: torch.Tensor = field(default_factory=_zero)
    tv: torch.Tensor = field(default_factory=_zero)
    penalty: torch.Tensor = field(default_factory=_zero)
    aug_bce: torch.Tensor = field(default_factory=_zero)
    cri: torch.Tensor = field(default_factory=_zero)

    @property
    def total(self) -> torch.Tensor:
        return self.reconstruction + self.kl + self.tv + self.penalty + self.aug_bce + self.cri

    def breakdown(self) -> EnergyBreakdown:
        values = {f.name: float(getattr(self, f.name).detach()) for f in fields(self)}
        return EnergyBreakdown(**values, total=float(self.total.detach()))


# ============================================================================
# Shared pieces
# ============================================================================


def as_image_tensor(image: Image | torch.Tensor) -> torch.Tensor:
    """C×H×W tensor of an Image (tensors pass through)."""
    return image.to_tensor() if isinstance(image, Image) else image


def stack_batch(batch: Sequence[Image] | torch.Tensor) -> torch.Tensor:
    """B×C×H×W tensor of a batch.

    Raises:
        InvalidInputError: If the batch is empty
    """
    if isinstance(batch, torch.Tensor):
        tensor = batch if batch.dim() == 4 else batch.unsqueeze(0)
    else:
        if not batch:
            raise InvalidInputError("Batch is empty")
        tensor = torch.stack([image.to_tensor() for image in batch])
    if tensor.shape[0] == 0:
        raise InvalidInputError("Batch is empty")
    return tensor


def draw_noise(
    stats: LatentStats, mc_samples: int, generator: torch.Generator
) -> torch.Tensor:
    """Standard-normal draws shaped (mc_samples, *stats.mean.shape)."""
    return standard_normal(
        (mc_samples, *stats.mean.shape), generator, dtype=stats.mean.dtype, device=stats.mean.device
    )


def reconstruction_term(
    decoder: Decoder, stats: LatentStats, image: torch.Tensor, noise: torch.Tensor
) -> torch.Tensor:
    """½ · mean over samples of ‖F(mean + √var ⊙ η_s) − I‖², summed over every pixel."""
    errors = [
        torch.sum((decode(decoder, sample_latent(stats, noise=eta)) - image) ** 2) for eta in noise
    ]
    return 0.5 * torch.stack(errors).mean()


def kl_term(
    stats: LatentStats, masks: torch.Tensor, priors: Sequence[GaussianPrior]
) -> torch.Tensor:
    """Σ_x Σ_i masks_i(x) · KL_x^{Ω_i}; ``masks`` is (..., N, H, W)."""
    return torch.sum(masks * kl_fields(stats, priors))


def binary_masks(u: torch.Tensor) -> torch.Tensor:
    """(u, 1 − u) stacked on a new channel axis: foreground first, matching prior order."""
    return torch.stack((u, 1.0 - u), dim=-3)


def _check_field(what: str, expected: tuple[int, ...], actual: torch.Tensor) -> None:
    if tuple(actual.shape) != expected:
        raise DimensionMismatchError(what, expected, tuple(actual.shape))


# ============================================================================
# Classical Chan-Vese
# ============================================================================


def _soft_indicator(u: LabelMask | torch.Tensor, like: torch.Tensor) -> torch.Tensor:
    if isinstance(u, LabelMask):
        return torch.from_numpy(u.foreground()).to(like.dtype)
    return u.to(like.dtype)


def region_means(
    image: Image | torch.Tensor, u: LabelMask | torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Exact minimizers (c₁, c₂) of the Chan-Vese data term for hard or soft u.

    Returns:
        Per-channel means of I weighted by u and by 1 − u, each shaped (C,)

    Raises:
        EmptyRegionError: If either region carries no weight
    """
    img = as_image_tensor(image)
    weight = _soft_indicator(u, img)
    inside, outside = weight.sum(), (1.0 - weight).sum()
    tiny = 1e-12
    if float(inside) <= tiny:
        raise EmptyRegionError(
            "foreground", "Use an initialization that marks some foreground pixels."
        )
    if float(outside) <= tiny:
        raise EmptyRegionError(
            "background", "Use an initialization that leaves some background pixels."
        )
    c1 = (img * weight).sum(dim=(-2, -1)) / inside
    c2 = (img * (1.0 - weight)).sum(dim=(-2, -1)) / outside
    return c1, c2


def cv_data_term(
    image: torch.Tensor, u: torch.Tensor, c1: torch.Tensor | float, c2: torch.Tensor | float
) -> torch.Tensor:
    """Σ_x u_x ‖I_x − c₁‖² + (1 − u_x) ‖I_x − c₂‖² (squared norms over channels)."""
    c1_t = torch.as_tensor(c1, dtype=image.dtype).reshape(-1, 1, 1)
    c2_t = torch.as_tensor(c2, dtype=image.dtype).reshape(-1, 1, 1)
    inside = ((image - c1_t) ** 2).sum(dim=-3)
    outside = ((image - c2_t) ** 2).sum(dim=-3)
    return torch.sum(u * inside + (1.0 - u) * outside)


def cv_energy(
    image: Image | torch.Tensor,
    u: LabelMask | torch.Tensor,
    c1: torch.Tensor | float,
    c2: torch.Tensor | float,
    nu: float,
) -> torch.Tensor:
    """Discrete Chan-Vese energy ν Σ_x ‖∇u_x‖ + u_x(I_x − c₁)² + (1 − u_x)(I_x − c₂)²."""
    img = as_image_tensor(image)
    weight = _soft_indicator(u, img)
    _check_field("mask shape", tuple(img.shape[-2:]), weight)
    return nu * tv_norm(forward_grad(weight)) + cv_data_term(img, weight, c1, c2)


# ============================================================================
# Single-image and multi-phase split energies
# ============================================================================


def single_image_energy(
    decoder: Decoder,
    encoder: Encoder,
    phi: LevelField,
    w: SplitField,
    image: Image | torch.Tensor,
    hp: Hyperparams,
    noise: torch.Tensor | None = None,
    generator: torch.Generator | None = None,
) -> EnergyTerms:
    """Split energy of one image.

    ν‖w‖_{1,2} + (λ/2)‖w − ∇S(φ)‖² + reconstruction + Σ_x S(φ)_x KL_x^fg + (1 − S(φ)_x) KL_x^bg.

    Args:
        decoder: F
        encoder: G
        phi: Level field (H, W)
        w: Split variable (2, H, W)
        image: Image or C×H×W tensor
        hp: Hyperparameters (priors[0] is the foreground prior)
        noise: Fixed η draws shaped (mc_samples, 1, d, H, W); drawn from ``generator`` if absent
        generator: Random stream for η

    Raises:
        DimensionMismatchError: If φ or w disagrees with the image size
    """
    img = as_image_tensor(image).unsqueeze(0)
    height, width = int(img.shape[-2]), int(img.shape[-1])
    _check_field("level field shape", (height, width), phi)
    _check_field("split field shape", (2, height, width), w)

    stats = encode(encoder, img)
    if noise is None:
        noise = draw_noise(stats, hp.mc_samples, generator or make_generator(0))
    u = soft_mask(phi)
    return EnergyTerms(
        reconstruction=reconstruction_term(decoder, stats, img, noise),
        kl=kl_term(stats, binary_masks(u).unsqueeze(0), hp.priors[:2]),
        tv=hp.nu * tv_norm(w),
        penalty=0.5 * hp.lam * torch.sum((w - forward_grad(u)) ** 2),
    )


def multiphase_energy(
    decoder: Decoder,
    encoder: Encoder,
    phi: LevelField,
    w: SplitField,
    image: Image | torch.Tensor,
    hp: Hyperparams,
    noise: torch.Tensor | None = None,
    generator: torch.Generator | None = None,
) -> EnergyTerms:
    """Split energy with N phases: Φ is (N, H, W), W is (N, 2, H, W), masks are softmax(Φ).

    Raises:
        DimensionMismatchError: If Φ, W or the prior count disagree
    """
    img = as_image_tensor(image).unsqueeze(0)
    height, width = int(img.shape[-2]), int(img.shape[-1])
    n = hp.n_phases
    _check_field("level field shape", (n, height, width), phi)
    _check_field("split field shape", (n, 2, height, width), w)

    stats = encode(encoder, img)
    if noise is None:
        noise = draw_noise(stats, hp.mc_samples, generator or make_generator(0))
    masks = soft_masks_multi(phi, dim=0)
    return EnergyTerms(
        reconstruction=reconstruction_term(decoder, stats, img, noise),
        kl=kl_term(stats, masks.unsqueeze(0), hp.priors),
        tv=hp.nu * tv_norm(w),
        penalty=0.5 * hp.lam * torch.sum((w - forward_grad(masks)) ** 2),
    )


# ============================================================================
# Dataset losses
# ============================================================================


def dataset_energy(
    decoder: Decoder,
    encoder: Encoder,
    segmenter: Segmenter,
    batch: Sequence[Image] | torch.Tensor,
    hp: Hyperparams,
    noise: torch.Tensor | None = None,
    generator: torch.Generator | None = None,
) -> EnergyTerms:
    """Reconstruction plus U-weighted KL, summed over the batch.

    Raises:
        InvalidInputError: If the batch is empty
    """
    images = stack_batch(batch)
    stats = encode(encoder, images)
    if noise is None:
        noise = draw_noise(stats, hp.mc_samples, generator or make_generator(0))
    u = segmenter(images)
    return EnergyTerms(
        reconstruction=reconstruction_term(decoder, stats, images, noise),
        kl=kl_term(stats, binary_masks(u), hp.priors[:2]),
    )


def _clamped_bce(p: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    eps = DeepCVConfig.PROB_CLAMP
    return F.binary_cross_entropy(p.clamp(eps, 1.0 - eps), target, reduction="sum")


def aug_invariance_bce(
    segmenter: Segmenter, batch: Sequence[Image] | torch.Tensor, op: Augmentation
) -> torch.Tensor:
    """BCE between U(O(I)) and the gradient-detached target O(U(I))."""
    images = stack_batch(batch)
    prediction = segmenter(op.apply(images))
    eps = DeepCVConfig.PROB_CLAMP
    target = op.apply(segmenter(images)).detach().clamp(eps, 1.0 - eps)
    return _clamped_bce(prediction, target)


def discriminator_bce(
    discriminator: Discriminator,
    real_batch: torch.Tensor,
    fake_fg_batch: torch.Tensor,
    fake_bg_batch: torch.Tensor,
) -> torch.Tensor:
    """−Σ ln D(real) − Σ ln(1 − D(fake_fg)) − Σ ln(1 − D(fake_bg))."""
    real = discriminator(real_batch)
    fake = discriminator(torch.cat([fake_fg_batch, fake_bg_batch], dim=0))
    return _clamped_bce(real, torch.ones_like(real)) + _clamped_bce(fake, torch.zeros_like(fake))


def fake_region_images(
    decoder: Decoder, hp: Hyperparams, count: int, height: int, width: int, generator: torch.Generator
) -> tuple[torch.Tensor, torch.Tensor]:
    """Decoded pure-foreground and pure-background images, each (count, C, H, W)."""
    z_fg = sample_prior_image(hp.prior_fg, height, width, generator, batch=count)
    z_bg = sample_prior_image(hp.prior_bg, height, width, generator, batch=count)
    return decode(decoder, z_fg), decode(decoder, z_bg)


def cri_loss(
    segmenter: Segmenter,
    decoder: Decoder,
    discriminator: Discriminator,
    batch: Sequence[Image] | torch.Tensor,
    hp: Hyperparams,
    seed: int | torch.Generator,
) -> torch.Tensor:
    """−Σ ln D(F(Z_fg ⊙ U(I) + Z_bg ⊙ (1 − U(I)))) with F and D held fixed.

    Z_fg and Z_bg are fresh per-image prior draws; gradients reach only U's parameters.
    """
    images = stack_batch(batch)
    count, _, height, width = images.shape
    generator = seed if isinstance(seed, torch.Generator) else make_generator(seed)
    z_fg = sample_prior_image(hp.prior_fg, height, width, generator, batch=count, dtype=images.dtype)
    z_bg = sample_prior_image(hp.prior_bg, height, width, generator, batch=count, dtype=images.dtype)
    with frozen(decoder, discriminator):
        u = segmenter(images).unsqueeze(1)
        composed = z_fg * u + z_bg * (1.0 - u)
        score = discriminator(decode(decoder, composed))
        return _clamped_bce(score, torch.ones_like(score))
