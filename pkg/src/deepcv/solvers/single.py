"""Unsupervised single-image segmentation with a latent Gaussian region model."""

from __future__ import annotations

import torch

from ..energies import EnergyTerms, single_image_energy
from ..imagecore import Image, LabelMask
from ..models import Hyperparams, OnIterationCallback, SolverConfig
from ..networks import binarize, soft_mask
from ..report_models import SolveReport
from .base import AlternatingSolver, AlternatingState
from .init import init_level_set


class SingleImageSolver(AlternatingSolver):
    """Binary solver: level field φ (H, W), split variable w (2, H, W), label = sign(φ)."""

    name = "single"

    @property
    def latent_dim(self) -> int:
        return self.hp.d

    def initial_level(self, image: Image) -> torch.Tensor:
        return init_level_set(image, self.cfg.init_mode, seed=self.cfg.seed)

    def soft_masks(self, level: torch.Tensor) -> torch.Tensor:
        return soft_mask(level)

    def energy(
        self, state: AlternatingState, image: torch.Tensor, noise: torch.Tensor
    ) -> EnergyTerms:
        return single_image_energy(
            state.decoder, state.encoder, state.level, state.w, image, self.hp, noise=noise
        )

    def hard_labels(self, level: torch.Tensor) -> LabelMask:
        return binarize(level)


def step_single(
    state: AlternatingState, image: Image, hp: Hyperparams, cfg: SolverConfig
) -> AlternatingState:
    """One optimizer step on (θ, γ, φ) followed by the exact w-update; mutates ``state``."""
    return SingleImageSolver(hp, cfg).step(state, image.to_tensor())


def solve_single(
    image: Image,
    hp: Hyperparams,
    cfg: SolverConfig,
    on_iteration: OnIterationCallback = None,
) -> tuple[LabelMask, SolveReport]:
    """Segment one image into foreground (label 1) and background.

    Runs :func:`step_single` for ``cfg.max_iters`` iterations or until the monitored energy
    stagnates, then returns ``binarize(φ)`` with the run report.

    Example:
        image, truth = make_synthetic("two_gaussian_disk", 64, 64, seed=0)
        mask, report = solve_single(image, Hyperparams.from_preset("single"), SolverConfig())
    """
    return SingleImageSolver(hp, cfg, on_iteration).solve(image)
