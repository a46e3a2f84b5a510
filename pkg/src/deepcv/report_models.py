"""Report models for solver runs, training runs and evaluation.

This module contains Pydantic models for everything a run emits, including:
- EnergyBreakdown: Float components of one energy evaluation
- SolveReport: Trace and diagnostics of a single-image or multi-phase solve
- TrainingReport: Per-epoch record of a dataset training run
- ImageScores: Per-image evaluation metrics
- EvalSummary: Directory-level evaluation summary
- OperationResult: Wrapper for per-item results with error handling
"""

from pydantic import BaseModel, Field, computed_field


class EnergyBreakdown(BaseModel):
    """Components of one energy evaluation (all nonnegative)."""

    reconstruction: float = Field(0.0, description="½·MC-mean ‖F(Z) − I‖²")
    kl: float = Field(0.0, description="Mask-weighted KL to the region priors")
    tv: float = Field(0.0, description="ν‖w‖_{1,2} (or ν·TV(u) for the classical model)")
    penalty: float = Field(0.0, description="(λ/2)‖w − ∇S(φ)‖²")
    aug_bce: float = Field(0.0, description="Augmentation-invariance BCE")
    cri: float = Field(0.0, description="Conservation-of-region-information loss")
    total: float = Field(0.0, description="Sum of the active components")

    def as_row(self, iteration: int) -> dict[str, float | int]:
        """Trace CSV row for this breakdown."""
        return {"iter": iteration, **self.model_dump()}


class LatentRegionStats(BaseModel):
    """Empirical latent mean/variance of one region (per latent dimension)."""

    label: int = Field(..., description="Region label")
    pixels: int = Field(..., description="Pixel count of the region")
    mean: list[float] = Field(..., description="Mean of G^μ(I) over the region")
    variance: list[float] = Field(..., description="Variance of G^μ(I) over the region")


class SolveReport(BaseModel):
    """Trace and diagnostics of one solver run."""

    solver: str = Field(..., description="Solver name")
    iterations: int = Field(..., description="Iterations actually run")
    seed: int = Field(..., description="Seed of the run")
    trace: list[EnergyBreakdown] = Field(
        default_factory=list, description="Energy at the initial state and after each iteration"
    )
    descent_violations: int = Field(
        0, description="Iterations where the monitored energy rose by more than the tolerance"
    )
    w_step_violations: int = Field(
        0, description="w-updates that increased E_LS (must stay 0)"
    )
    stopped_early: bool = Field(False, description="True if the stagnation rule fired")
    wall_time: float = Field(0.0, description="Wall-clock seconds")
    final_mask_labels: list[int] = Field(
        default_factory=list, description="Distinct labels present in the final mask"
    )
    latent_stats: list[LatentRegionStats] = Field(
        default_factory=list, description="Latent distribution per final region"
    )

    @computed_field
    @property
    def totals(self) -> list[float]:
        """Total energy per trace entry."""
        return [e.total for e in self.trace]


class EpochRecord(BaseModel):
    """Losses and validation scores of one training epoch."""

    epoch: int = Field(..., description="1-based epoch")
    energy: float = Field(..., description="Mean reconstruction + KL loss per batch")
    aug_bce: float = Field(0.0, description="Mean augmentation BCE per batch")
    disc_bce: float = Field(0.0, description="Mean discriminator BCE per batch")
    cri: float = Field(0.0, description="Mean CRI loss per batch")
    val_acc: float | None = Field(None, description="Validation accuracy (needs masks)")
    val_miou: float | None = Field(None, description="Validation mIoU (needs masks)")


class TrainingReport(BaseModel):
    """Record of a dataset training run."""

    epochs: list[EpochRecord] = Field(default_factory=list)
    best_epoch: int = Field(0, description="Epoch whose checkpoint was selected")
    selected_by: str = Field("final", description="'val_miou' or 'final'")
    wall_time: float = Field(0.0)
    seed: int = Field(0)


class ImageScores(BaseModel):
    """Evaluation scores of one predicted mask."""

    image: str = Field(..., description="Image identifier")
    acc: float = Field(..., description="Pixel accuracy")
    f: float = Field(..., description="F-measure")
    miou: float = Field(..., description="Intersection over union")
    precision: float = Field(0.0)
    recall: float = Field(0.0)
    flags: list[str] = Field(
        default_factory=list, description="Degenerate-denominator conventions that applied"
    )


class EvalSummary(BaseModel):
    """Directory-level evaluation: unweighted per-image means plus failures."""

    images: int = Field(0, description="Images scored successfully")
    failures: int = Field(0, description="Images that could not be scored")
    acc: float | None = Field(None)
    f: float | None = Field(None)
    miou: float | None = Field(None)
    precision: float | None = Field(None)
    recall: float | None = Field(None)
    errors: list[str] = Field(default_factory=list, description="One message per failure")


class OperationResult[T](BaseModel):
    """Wrapper for per-item operation results with error handling.

    Either `success` or `error` will be set, never both.
    `data` is only populated on success.
    """

    success: str | None = Field(default=None, description="Success message if operation succeeded")
    error: str | None = Field(default=None, description="Error message if operation failed")
    data: T | None = Field(default=None, description="Result data (only on success)")

    @property
    def is_success(self) -> bool:
        """Return True if the operation succeeded."""
        return self.error is None and self.success is not None

    @property
    def is_error(self) -> bool:
        """Return True if the operation failed."""
        return self.error is not None

    def value_or_throw(self) -> T:
        """Get the data value or raise an exception if error.

        Returns:
            The data value

        Raises:
            RuntimeError: If the operation failed
        """
        if self.is_error:
            raise RuntimeError(f"Operation failed: {self.error}")
        if self.data is None:
            raise RuntimeError("Operation succeeded but data is None")
        return self.data
