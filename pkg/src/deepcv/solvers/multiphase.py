"""Unsupervised multi-phase segmentation: N softmax-relaxed regions with one prior each."""

from __future__ import annotations

import torch

from ..energies import EnergyTerms, multiphase_energy
from ..exceptions import InvalidInputError
from ..imagecore import Image, LabelMask
from ..models import Hyperparams, OnIterationCallback, SolverConfig
from ..networks import binarize, soft_masks_multi
from ..report_models import SolveReport
from .base import AlternatingSolver, AlternatingState
from .init import init_multiphase_level


class MultiphaseSolver(AlternatingSolver):
    """N-phase solver: Φ (N, H, W), W (N, 2, H, W), label = argmax_i φ_i."""

    name = "multiphase"

    def __init__(
        self, hp: Hyperparams, cfg: SolverConfig, on_iteration: OnIterationCallback = None
    ) -> None:
        super().__init__(hp, cfg, on_iteration)
        if hp.n_phases < 2:
            raise InvalidInputError(f"Multi-phase segmentation needs N >= 2, got {hp.n_phases}")

    @property
    def latent_dim(self) -> int:
        return self.hp.d

    def initial_level(self, image: Image) -> torch.Tensor:
        return init_multiphase_level(image, self.hp.n_phases, self.cfg.init_mode, seed=self.cfg.seed)

    def soft_masks(self, level: torch.Tensor) -> torch.Tensor:
        return soft_masks_multi(level, dim=0)

    def energy(
        self, state: AlternatingState, image: torch.Tensor, noise: torch.Tensor
    ) -> EnergyTerms:
        return multiphase_energy(
            state.decoder, state.encoder, state.level, state.w, image, self.hp, noise=noise
        )

    def hard_labels(self, level: torch.Tensor) -> LabelMask:
        return binarize(level)


def solve_multiphase(
    image: Image,
    n_phases: int,
    hp: Hyperparams | None = None,
    cfg: SolverConfig | None = None,
    on_iteration: OnIterationCallback = None,
) -> tuple[LabelMask, SolveReport]:
    """Segment one image into ``n_phases`` regions.

    Args:
        image: Image to segment
        n_phases: Region count N (≥ 2)
        hp: Hyperparameters; defaults to the "multiphase" preset (μ_i = 5e_i, Σ_i = I, d = N)
        cfg: Solver settings; defaults to random initialization
        on_iteration: Optional progress callback

    Returns:
        Tuple of (N-label mask, run report)

    Raises:
        InvalidInputError: If N < 2 or the priors do not provide N regions
    """
    if n_phases < 2:
        raise InvalidInputError(f"Multi-phase segmentation needs N >= 2, got {n_phases}")
    hp = hp or Hyperparams.from_preset("multiphase", n_phases=n_phases)
    if hp.n_phases != n_phases:
        raise InvalidInputError(f"Hyperparams define {hp.n_phases} priors, expected {n_phases}")
    cfg = cfg or SolverConfig(init_mode="random")
    return MultiphaseSolver(hp, cfg, on_iteration).solve(image)
