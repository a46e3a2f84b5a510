"""Segmentation solvers."""

from .base import AlternatingSolver, AlternatingState, BaseSolver, SolveMonitor, latent_region_stats
from .baseline import (
    ChanVeseBaseline,
    GaussianRegionBaseline,
    solve_cv_baseline,
    solve_gaussian_region_baseline,
)
from .dataset import DatasetTrainer, infer_dataset, load_segmenter, train_dataset
from .init import init_level_set, init_multiphase_level, parse_init_mode
from .multiphase import MultiphaseSolver, solve_multiphase
from .single import SingleImageSolver, solve_single, step_single

__all__ = [
    "AlternatingSolver",
    "AlternatingState",
    "BaseSolver",
    "ChanVeseBaseline",
    "DatasetTrainer",
    "GaussianRegionBaseline",
    "MultiphaseSolver",
    "SingleImageSolver",
    "SolveMonitor",
    "infer_dataset",
    "init_level_set",
    "init_multiphase_level",
    "latent_region_stats",
    "load_segmenter",
    "parse_init_mode",
    "solve_cv_baseline",
    "solve_gaussian_region_baseline",
    "solve_multiphase",
    "solve_single",
    "step_single",
    "train_dataset",
]
