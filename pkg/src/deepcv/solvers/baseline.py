"""Classical region baselines: Chan-Vese (piecewise constant) and Gaussian regions (mean and variance).

Both alternate closed-form region statistics with a descent step on a sigmoid-relaxed level
field, and handle the TV term with the same split variable and exact shrinkage as the deep solvers.
"""

from __future__ import annotations

import math
import time

import torch
from loguru import logger
from torch import nn

from ..config import DeepCVConfig
from ..diffgeo import coupling_energy, forward_grad, shrinkage, tv_norm
from ..energies import cv_data_term, region_means
from ..exceptions import DimensionMismatchError
from ..imagecore import Image, LabelMask
from ..models import Hyperparams, OnIterationCallback, SolverConfig
from ..networks import binarize, soft_mask
from ..report_models import EnergyBreakdown, SolveReport
from .base import BaseSolver
from .init import init_level_set

type RegionStats = tuple[torch.Tensor, ...]


class RegionBaselineSolver(BaseSolver):
    """Shared loop of the classical baselines; subclasses define statistics and data term."""

    name = "region_baseline"

    def __init__(
        self,
        hp: Hyperparams,
        cfg: SolverConfig,
        init_mask: LabelMask | None = None,
        on_iteration: OnIterationCallback = None,
    ) -> None:
        super().__init__(hp, cfg, on_iteration)
        self.init_mask: LabelMask | None = init_mask

    def region_stats(self, image: torch.Tensor, u: torch.Tensor) -> RegionStats:
        return region_means(image, u)

    def data_term(self, image: torch.Tensor, u: torch.Tensor, stats: RegionStats) -> torch.Tensor:
        c1, c2 = stats
        return cv_data_term(image, u, c1, c2)

    def initial_level(self, image: Image) -> torch.Tensor:
        if self.init_mask is None:
            return init_level_set(image, "otsu")
        if self.init_mask.shape != (image.height, image.width):
            raise DimensionMismatchError(
                "initial mask shape", (image.height, image.width), self.init_mask.shape
            )
        return torch.from_numpy(self.init_mask.foreground()).to(torch.float32) * 2.0 - 1.0

    def _breakdown(
        self, image: torch.Tensor, level: torch.Tensor, w: torch.Tensor, stats: RegionStats
    ) -> EnergyBreakdown:
        u = soft_mask(level)
        data = float(self.data_term(image, u, stats))
        tv = float(self.hp.nu * tv_norm(w))
        penalty = float(0.5 * self.hp.lam * torch.sum((w - forward_grad(u)) ** 2))
        return EnergyBreakdown(reconstruction=data, tv=tv, penalty=penalty, total=data + tv + penalty)

    def solve(self, image: Image) -> tuple[LabelMask, SolveReport]:
        """Run the baseline from the initial mask.

        Raises:
            EmptyRegionError: If the initial mask leaves a region empty
        """
        started = time.perf_counter()
        img = image.to_tensor()
        initial = self.initial_level(image)
        _ = self.region_stats(img, (initial > 0).to(img.dtype))

        level = nn.Parameter(initial)
        optimizer = self.make_optimizer([("level", [level])])
        with torch.no_grad():
            w = shrinkage(forward_grad(soft_mask(level)), self.hp.nu, self.hp.lam)
            stats = self.region_stats(img, soft_mask(level))
        monitor = self.new_monitor()
        monitor.record(self._breakdown(img, level.detach(), w, stats))

        stopped_early = False
        iterations = 0
        for k in range(1, self.cfg.max_iters + 1):
            optimizer.zero_grad(set_to_none=True)
            u = soft_mask(level)
            loss = self.data_term(img, u, stats) + 0.5 * self.hp.lam * torch.sum(
                (w - forward_grad(u)) ** 2
            )
            loss.backward()
            optimizer.step()
            self.clip(optimizer)
            self.check_finite(k, optimizer, float(loss.detach()))

            with torch.no_grad():
                target = forward_grad(soft_mask(level))
                target64 = target.double()
                before = float(coupling_energy(w.double(), target64, self.hp.nu, self.hp.lam))
                w = shrinkage(target, self.hp.nu, self.hp.lam)
                after = float(coupling_energy(w.double(), target64, self.hp.nu, self.hp.lam))
                stats = self.region_stats(img, soft_mask(level))
            monitor.record_w_step(before, after)
            breakdown = self._breakdown(img, level.detach(), w, stats)
            monitor.record(breakdown)
            iterations = k
            self.emit(k, breakdown.total)
            if monitor.stagnated():
                stopped_early = True
                break

        mask = binarize(level)
        logger.debug(f"{self.name}: final region statistics {[s.tolist() for s in stats]}")
        return mask, self.build_report(monitor, iterations, started, mask, stopped_early)


class ChanVeseBaseline(RegionBaselineSolver):
    """Piecewise-constant regions; c₁, c₂ are the exact weighted means."""

    name = "cv_baseline"


class GaussianRegionBaseline(RegionBaselineSolver):
    """Gaussian regions with their own mean and variance (negative log-likelihood data term)."""

    name = "gaussian_region_baseline"

    def region_stats(self, image: torch.Tensor, u: torch.Tensor) -> RegionStats:
        c1, c2 = region_means(image, u)
        floor = DeepCVConfig.BASELINE_VARIANCE_FLOOR
        var1 = (u * (image - c1.reshape(-1, 1, 1)) ** 2).sum(dim=(-2, -1)) / u.sum()
        var2 = ((1.0 - u) * (image - c2.reshape(-1, 1, 1)) ** 2).sum(dim=(-2, -1)) / (1.0 - u).sum()
        return c1, c2, torch.clamp(var1, min=floor), torch.clamp(var2, min=floor)

    def data_term(self, image: torch.Tensor, u: torch.Tensor, stats: RegionStats) -> torch.Tensor:
        c1, c2, var1, var2 = (s.reshape(-1, 1, 1) for s in stats)
        nll1 = (0.5 * torch.log(2 * math.pi * var1) + (image - c1) ** 2 / (2 * var1)).sum(dim=-3)
        nll2 = (0.5 * torch.log(2 * math.pi * var2) + (image - c2) ** 2 / (2 * var2)).sum(dim=-3)
        return torch.sum(u * nll1 + (1.0 - u) * nll2)


def _baseline_config(iters: int, seed: int) -> SolverConfig:
    return SolverConfig(
        max_iters=iters,
        learning_rate=DeepCVConfig.BASELINE_LEARNING_RATE,
        seed=seed,
    )


def solve_cv_baseline(
    image: Image,
    init_mask: LabelMask | None = None,
    nu: float = DeepCVConfig.DEFAULT_NU,
    iters: int = DeepCVConfig.BASELINE_MAX_ITERS,
    lam: float = DeepCVConfig.DEFAULT_LAMBDA,
    seed: int = 0,
) -> tuple[LabelMask, SolveReport]:
    """Chan-Vese baseline from ``init_mask`` (Otsu when omitted).

    Raises:
        EmptyRegionError: If the initial mask has an empty foreground or background
    """
    hp = Hyperparams.from_preset("single", nu=nu, lam=lam)
    return ChanVeseBaseline(hp, _baseline_config(iters, seed), init_mask).solve(image)


def solve_gaussian_region_baseline(
    image: Image,
    init_mask: LabelMask | None = None,
    nu: float = DeepCVConfig.DEFAULT_NU,
    iters: int = DeepCVConfig.BASELINE_MAX_ITERS,
    lam: float = DeepCVConfig.DEFAULT_LAMBDA,
    seed: int = 0,
) -> tuple[LabelMask, SolveReport]:
    """Gaussian-region baseline: like Chan-Vese but each region also fits its variance.

    Raises:
        EmptyRegionError: If the initial mask has an empty foreground or background
    """
    hp = Hyperparams.from_preset("single", nu=nu, lam=lam)
    return GaussianRegionBaseline(hp, _baseline_config(iters, seed), init_mask).solve(image)
