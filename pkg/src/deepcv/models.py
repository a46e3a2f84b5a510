"""Pydantic models for segmentation hyperparameters, network specs and solver settings.

Every model validates its invariants at construction (NO unchecked numbers reach a solver).
"""

from __future__ import annotations

from collections.abc import Callable
from typing import Self

import torch
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .config import DeepCVConfig
from .exceptions import DimensionMismatchError, InvalidInputError
from .types import Activation, Normalization, OptimizerName


class GaussianPrior(BaseModel):
    """Diagonal Gaussian prior N(μ_i, Σ_i) of one region in latent space."""

    model_config = ConfigDict(frozen=True)  # pyright: ignore[reportUnannotatedClassAttribute]

    mean: list[float] = Field(..., min_length=1, description="Prior mean, one entry per latent dim")
    variance: list[float] = Field(
        ..., min_length=1, description="Diagonal of the prior covariance (all > 0)"
    )

    @model_validator(mode="after")
    def _check(self) -> Self:
        if len(self.mean) != len(self.variance):
            raise DimensionMismatchError("prior dimension", len(self.mean), len(self.variance))
        if any(v <= 0 for v in self.variance):
            raise InvalidInputError(f"Prior variances must be > 0, got {self.variance}")
        return self

    @property
    def d(self) -> int:
        """Latent dimension."""
        return len(self.mean)

    def tensors(
        self, dtype: torch.dtype = torch.float32, device: torch.device | str = "cpu"
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Mean and variance as (d, 1, 1) tensors broadcastable over (..., d, H, W)."""
        mean = torch.tensor(self.mean, dtype=dtype, device=device).view(-1, 1, 1)
        var = torch.tensor(self.variance, dtype=dtype, device=device).view(-1, 1, 1)
        return mean, var


class Hyperparams(BaseModel):
    """Energy hyperparameters shared by the single-image, multi-phase and dataset models."""

    nu: float = Field(DeepCVConfig.DEFAULT_NU, gt=0, description="TV weight ν")
    lam: float = Field(DeepCVConfig.DEFAULT_LAMBDA, gt=0, description="Splitting penalty λ")
    priors: list[GaussianPrior] = Field(
        ..., min_length=2, description="Region priors; [0] is foreground, [1] background"
    )
    mc_samples: int = Field(
        DeepCVConfig.DEFAULT_MC_SAMPLES, ge=1, description="Monte-Carlo samples of η"
    )
    reduced_variance: bool = Field(
        True, description="Fix the encoder variance to 1 (no variance head)"
    )

    @field_validator("priors")
    @classmethod
    def _same_dimension(cls, priors: list[GaussianPrior]) -> list[GaussianPrior]:
        dims = {p.d for p in priors}
        if len(dims) != 1:
            raise InvalidInputError(f"All priors must share one latent dimension, got {dims}")
        return priors

    @property
    def d(self) -> int:
        """Latent dimension."""
        return self.priors[0].d

    @property
    def n_phases(self) -> int:
        """Number of regions."""
        return len(self.priors)

    @property
    def prior_fg(self) -> GaussianPrior:
        return self.priors[0]

    @property
    def prior_bg(self) -> GaussianPrior:
        return self.priors[1]

    @classmethod
    def from_preset(cls, preset: str, n_phases: int = 2, **overrides: object) -> Hyperparams:
        """Build hyperparameters from a named prior preset.

        Args:
            preset: "single", "multiphase" or "dataset"
            n_phases: Region count (multiphase only)
            **overrides: Any other Hyperparams field

        Returns:
            Validated Hyperparams
        """
        means, variances = DeepCVConfig.get_prior_preset(preset, n_phases)
        priors = [GaussianPrior(mean=m, variance=v) for m, v in zip(means, variances, strict=True)]
        if preset == "dataset":
            _ = overrides.setdefault("reduced_variance", False)
        return cls.model_validate({"priors": priors, **overrides})


class NetworkSpec(BaseModel):
    """Architecture of one U-net (or, with channel widths, the discriminator)."""

    model_config = ConfigDict(frozen=True)  # pyright: ignore[reportUnannotatedClassAttribute]

    depth: int = Field(DeepCVConfig.UNET_DEPTH, ge=1, description="Down/up-sampling stages")
    base_channels: int = Field(
        DeepCVConfig.UNET_BASE_CHANNELS, ge=1, description="Channels after the first stage"
    )
    activation: Activation = Field(DeepCVConfig.UNET_ACTIVATION, description="Nonlinearity")  # pyright: ignore[reportAssignmentType]
    normalization: Normalization = Field("none", description="Feature normalization")
    in_channels: int = Field(1, ge=1, description="Input channels")
    out_channels: int = Field(1, ge=1, description="Output channels")

    def check_input(self, height: int, width: int) -> None:
        """Validate that a spatial size survives ``depth`` halvings.

        Raises:
            InvalidInputError: If height or width is not divisible by 2**depth
        """
        factor = 2**self.depth
        if height % factor or width % factor:
            raise InvalidInputError(
                f"Input size {height}x{width} is not divisible by 2^{self.depth}={factor}"
            )

    def with_io(self, in_channels: int, out_channels: int) -> NetworkSpec:
        """Copy of this spec with new input/output channel counts."""
        return self.model_copy(update={"in_channels": in_channels, "out_channels": out_channels})


class SolverConfig(BaseModel):
    """Settings of the single-image and multi-phase alternating solvers."""

    max_iters: int = Field(DeepCVConfig.DEFAULT_MAX_ITERS, ge=0, description="Iteration cap")
    learning_rate: float = Field(
        DeepCVConfig.DEFAULT_LEARNING_RATE, gt=0, description="Shared step size for all blocks"
    )
    lr_decoder: float | None = Field(None, gt=0, description="Override α₁ (decoder θ)")
    lr_encoder: float | None = Field(None, gt=0, description="Override α₂ (encoder γ)")
    lr_level: float | None = Field(None, gt=0, description="Override α₃ (level field φ)")
    betas: tuple[float, float] = Field(DeepCVConfig.DEFAULT_ADAM_BETAS, description="Adam betas")
    optimizer: OptimizerName = Field("adam", description="adam, or sgd for plain descent")
    init_mode: str = Field("otsu", description="otsu | center_box | random | from_mask:PATH")
    early_stop: bool = Field(True, description="Stop on relative energy stagnation")
    early_stop_window: int = Field(DeepCVConfig.EARLY_STOP_WINDOW, ge=1)
    early_stop_tol: float = Field(DeepCVConfig.EARLY_STOP_REL_TOL, ge=0)
    clip_radius: float | None = Field(
        None, gt=0, description="Clamp every parameter to [-r, r] after each step (off by default)"
    )
    seed: int = Field(0, description="Seed for initialization and Monte-Carlo noise")
    network: NetworkSpec = Field(default_factory=NetworkSpec, description="U-net for F and G")

    def rate_for(self, block: str) -> float:
        """Step size of one parameter block ("decoder", "encoder" or "level")."""
        override = {
            "decoder": self.lr_decoder,
            "encoder": self.lr_encoder,
            "level": self.lr_level,
        }[block]
        return override if override is not None else self.learning_rate


class DatasetTrainerConfig(BaseModel):
    """Settings of the dataset-based trainer."""

    epochs: int = Field(DeepCVConfig.DATASET_EPOCHS, ge=1)
    batch_size: int = Field(DeepCVConfig.DATASET_BATCH_SIZE, ge=1)
    learning_rate: float = Field(DeepCVConfig.DATASET_LEARNING_RATE, gt=0)
    betas: tuple[float, float] = Field(DeepCVConfig.DEFAULT_ADAM_BETAS)
    image_size: int = Field(DeepCVConfig.DATASET_IMAGE_SIZE, ge=2)
    use_aui: bool = Field(True, description="Augmentation-invariance regularizer")
    use_cri: bool = Field(True, description="Conservation-of-region-information regularizer")
    seed: int = Field(0)
    network: NetworkSpec = Field(default_factory=NetworkSpec, description="U-net for F, G, U")
    discriminator_channels: tuple[int, ...] = Field(DeepCVConfig.DISCRIMINATOR_CHANNELS)


class IterationEvent(BaseModel):
    """Progress event emitted after each solver iteration."""

    iteration: int = Field(..., description="1-based iteration just completed")
    max_iters: int = Field(..., description="Iteration cap")
    total: float = Field(..., description="Monitored total energy after the iteration")


type OnIterationCallback = Callable[[IterationEvent], None] | None
