"""Unsupervised deep Chan-Vese image segmentation.

Public API exports for library usage.
"""

from .augment import Augmentation
from .checkpoint import CheckpointManifest, load_checkpoint, restore_into, save_checkpoint
from .config import DeepCVConfig
from .diffgeo import coupling_energy, forward_grad, pixel_norm, shrinkage, tv_norm
from .distributions import (
    LatentStats,
    kl_field,
    kl_fields,
    kl_map,
    kl_pointwise,
    make_generator,
    sample_latent,
    sample_prior_image,
)
from .energies import (
    EnergyTerms,
    aug_invariance_bce,
    cri_loss,
    cv_energy,
    dataset_energy,
    discriminator_bce,
    multiphase_energy,
    region_means,
    single_image_energy,
)
from .exceptions import (
    DeepCVError,
    DimensionMismatchError,
    EmptyRegionError,
    ImageIOError,
    InvalidInputError,
    NumericalAbortError,
)
from .imagecore import (
    DatasetLayout,
    DatasetSplit,
    Image,
    LabelMask,
    center_crop_resize,
    load_image,
    load_mask,
    make_synthetic,
    save_image,
    save_mask,
)
from .metrics import (
    ConfusionCounts,
    accuracy,
    confusion,
    f_measure,
    matched_multiphase_miou,
    miou,
    score_masks,
)
from .models import (
    DatasetTrainerConfig,
    GaussianPrior,
    Hyperparams,
    IterationEvent,
    NetworkSpec,
    OnIterationCallback,
    SolverConfig,
)
from .networks import (
    Decoder,
    Discriminator,
    Encoder,
    Segmenter,
    UNet,
    binarize,
    decode,
    encode,
    soft_mask,
    soft_masks_multi,
)
from .report_models import (
    EnergyBreakdown,
    EpochRecord,
    EvalSummary,
    ImageScores,
    OperationResult,
    SolveReport,
    TrainingReport,
)
from .run_config import RunConfig, load_run_config, save_run_config
from .run_pref import RunPref
from .solvers import (
    DatasetTrainer,
    infer_dataset,
    init_level_set,
    solve_cv_baseline,
    solve_gaussian_region_baseline,
    solve_multiphase,
    solve_single,
    step_single,
    train_dataset,
)

__all__ = [
    # Configuration
    "DeepCVConfig",
    "RunPref",
    "RunConfig",
    "load_run_config",
    "save_run_config",
    # Models
    "GaussianPrior",
    "Hyperparams",
    "NetworkSpec",
    "SolverConfig",
    "DatasetTrainerConfig",
    "IterationEvent",
    "OnIterationCallback",
    # Reports
    "EnergyBreakdown",
    "SolveReport",
    "EpochRecord",
    "TrainingReport",
    "ImageScores",
    "EvalSummary",
    "OperationResult",
    # Exceptions
    "DeepCVError",
    "InvalidInputError",
    "DimensionMismatchError",
    "EmptyRegionError",
    "ImageIOError",
    "NumericalAbortError",
    # Images and masks
    "Image",
    "LabelMask",
    "DatasetSplit",
    "DatasetLayout",
    "load_image",
    "save_image",
    "load_mask",
    "save_mask",
    "center_crop_resize",
    "make_synthetic",
    # Differential geometry
    "forward_grad",
    "pixel_norm",
    "tv_norm",
    "shrinkage",
    "coupling_energy",
    # Latent distributions
    "LatentStats",
    "make_generator",
    "kl_map",
    "kl_pointwise",
    "kl_field",
    "kl_fields",
    "sample_latent",
    "sample_prior_image",
    # Networks
    "UNet",
    "Encoder",
    "Decoder",
    "Segmenter",
    "Discriminator",
    "encode",
    "decode",
    "soft_mask",
    "soft_masks_multi",
    "binarize",
    "CheckpointManifest",
    "save_checkpoint",
    "load_checkpoint",
    "restore_into",
    "Augmentation",
    # Energies
    "EnergyTerms",
    "single_image_energy",
    "multiphase_energy",
    "dataset_energy",
    "aug_invariance_bce",
    "discriminator_bce",
    "cri_loss",
    "cv_energy",
    "region_means",
    # Solvers
    "init_level_set",
    "step_single",
    "solve_single",
    "solve_multiphase",
    "solve_cv_baseline",
    "solve_gaussian_region_baseline",
    "DatasetTrainer",
    "train_dataset",
    "infer_dataset",
    # Metrics
    "ConfusionCounts",
    "confusion",
    "accuracy",
    "f_measure",
    "miou",
    "matched_multiphase_miou",
    "score_masks",
]
