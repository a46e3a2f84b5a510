"""Base solver machinery shared by every segmentation solver.

Provides common functionality for all solvers:
- Optimizer construction with per-block step sizes (Adam or plain SGD)
- Energy-trace monitoring: descent diagnostics, w-step checks, stagnation stop
- Non-finite gradient/parameter detection with a diagnostic dump
- The alternating (network + level field, then exact w) loop used by the
  single-image and multi-phase solvers
"""

from __future__ import annotations

import time
from abc import ABC, abstractmethod
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
import torch
from loguru import logger
from torch import nn

from ..config import DeepCVConfig
from ..diffgeo import coupling_energy, forward_grad, shrinkage
from ..distributions import make_generator, standard_normal
from ..energies import EnergyTerms, as_image_tensor
from ..exceptions import NumericalAbortError
from ..imagecore import Image, LabelMask
from ..models import Hyperparams, IterationEvent, OnIterationCallback, SolverConfig
from ..networks import Decoder, Encoder, encode
from ..report_models import EnergyBreakdown, LatentRegionStats, SolveReport
from ..types import JSONObject


class SolveMonitor:
    """Records the energy trace of one run and evaluates the stopping rule.

    A descent violation is an iteration whose monitored total exceeds the previous one by
    more than τ = DESCENT_TOL_FACTOR · (1 + |E₀|). A w-step violation is a w-update that
    raised the coupling energy by more than W_STEP_TOL.
    """

    def __init__(self, early_stop: bool = True, window: int = 20, rel_tol: float = 1e-5) -> None:
        self.early_stop: bool = early_stop
        self.window: int = window
        self.rel_tol: float = rel_tol
        self.trace: list[EnergyBreakdown] = []
        self.descent_violations: int = 0
        self.w_step_violations: int = 0

    @property
    def descent_tolerance(self) -> float:
        if not self.trace:
            return 0.0
        return DeepCVConfig.DESCENT_TOL_FACTOR * (1.0 + abs(self.trace[0].total))

    def record(self, breakdown: EnergyBreakdown) -> None:
        if self.trace and breakdown.total > self.trace[-1].total + self.descent_tolerance:
            self.descent_violations += 1
            logger.debug(
                f"Energy rose at entry {len(self.trace)}: "
                f"{self.trace[-1].total:.6g} -> {breakdown.total:.6g}"
            )
        self.trace.append(breakdown)

    def record_w_step(self, before: float, after: float) -> None:
        if after > before + DeepCVConfig.W_STEP_TOL:
            self.w_step_violations += 1
            logger.warning(f"w-update increased the coupling energy: {before:.12g} -> {after:.12g}")

    def stagnated(self) -> bool:
        """Relative change of the total over the last ``window`` iterations is below tolerance."""
        if not self.early_stop or len(self.trace) <= self.window:
            return False
        previous = self.trace[-1 - self.window].total
        current = self.trace[-1].total
        return abs(current - previous) / max(abs(previous), 1e-12) < self.rel_tol


class BaseSolver(ABC):
    """Base class for solvers.

    Each solver extends this and implements :meth:`solve`. Subclasses share the optimizer
    factory, finite checks, clipping and report assembly.
    """

    name: ClassVar[str] = "base"

    def __init__(
        self, hp: Hyperparams, cfg: SolverConfig, on_iteration: OnIterationCallback = None
    ) -> None:
        """Initialize solver.

        Args:
            hp: Energy hyperparameters
            cfg: Optimization settings
            on_iteration: Optional callback invoked after every iteration
        """
        self.hp: Hyperparams = hp
        self.cfg: SolverConfig = cfg
        self.on_iteration: OnIterationCallback = on_iteration

    @abstractmethod
    def solve(self, image: Image) -> tuple[LabelMask, SolveReport]: ...

    def make_optimizer(
        self, blocks: Iterable[tuple[str, Iterable[torch.Tensor]]]
    ) -> torch.optim.Optimizer:
        """Optimizer with one parameter group per block ("decoder", "encoder", "level")."""
        groups = [
            {"params": list(params), "lr": self.cfg.rate_for(block), "name": block}
            for block, params in blocks
        ]
        groups = [g for g in groups if g["params"]]
        if self.cfg.optimizer == "sgd":
            return torch.optim.SGD(groups)
        return torch.optim.Adam(groups, betas=self.cfg.betas)

    def new_monitor(self) -> SolveMonitor:
        return SolveMonitor(
            early_stop=self.cfg.early_stop,
            window=self.cfg.early_stop_window,
            rel_tol=self.cfg.early_stop_tol,
        )

    def check_finite(
        self, iteration: int, optimizer: torch.optim.Optimizer, last_total: float | None
    ) -> None:
        """Raise NumericalAbortError if any parameter or gradient is NaN/Inf."""
        bad: list[str] = []
        for group in optimizer.param_groups:
            block = str(group.get("name", "?"))
            for index, p in enumerate(group["params"]):
                tensor: torch.Tensor = p
                if not torch.isfinite(tensor).all():
                    bad.append(f"{block}[{index}] value")
                if tensor.grad is not None and not torch.isfinite(tensor.grad).all():
                    bad.append(f"{block}[{index}] grad")
        if bad:
            diagnostics: JSONObject = {
                "solver": self.name,
                "iteration": iteration,
                "non_finite": list(bad[:20]),
                "last_total": last_total,
                "seed": self.cfg.seed,
            }
            logger.error(f"{self.name}: non-finite values at iteration {iteration}: {bad[:5]}")
            raise NumericalAbortError(iteration, diagnostics)

    def clip(self, optimizer: torch.optim.Optimizer) -> None:
        radius = self.cfg.clip_radius
        if radius is None:
            return
        with torch.no_grad():
            for group in optimizer.param_groups:
                for p in group["params"]:
                    _ = p.clamp_(-radius, radius)

    def emit(self, iteration: int, total: float) -> None:
        if self.on_iteration is not None:
            self.on_iteration(
                IterationEvent(iteration=iteration, max_iters=self.cfg.max_iters, total=total)
            )

    def build_report(
        self,
        monitor: SolveMonitor,
        iterations: int,
        started: float,
        mask: LabelMask,
        stopped_early: bool,
        latent_stats: list[LatentRegionStats] | None = None,
    ) -> SolveReport:
        report = SolveReport(
            solver=self.name,
            iterations=iterations,
            seed=self.cfg.seed,
            trace=monitor.trace,
            descent_violations=monitor.descent_violations,
            w_step_violations=monitor.w_step_violations,
            stopped_early=stopped_early,
            wall_time=time.perf_counter() - started,
            final_mask_labels=sorted(int(v) for v in np.unique(mask.labels)),
            latent_stats=latent_stats or [],
        )
        logger.info(
            f"{self.name}: {iterations} iterations, E {report.trace[0].total:.6g} -> "
            f"{report.trace[-1].total:.6g}, descent violations {report.descent_violations}, "
            f"{report.wall_time:.2f}s"
        )
        return report


def latent_region_stats(encoder: Encoder, image: Image, mask: LabelMask) -> list[LatentRegionStats]:
    """Empirical mean/variance of G^μ(I) over each labeled region (empty regions skipped)."""
    with torch.no_grad():
        mean = encode(encoder, image.to_tensor().unsqueeze(0)).mean[0]
    flat = mean.reshape(mean.shape[0], -1).to(torch.float64)
    labels = torch.from_numpy(mask.labels.reshape(-1).copy())
    stats: list[LatentRegionStats] = []
    for label in range(mask.n_labels):
        values = flat[:, labels == label]
        if values.shape[1] == 0:
            continue
        stats.append(
            LatentRegionStats(
                label=label,
                pixels=int(values.shape[1]),
                mean=values.mean(dim=1).tolist(),
                variance=values.var(dim=1, unbiased=False).tolist(),
            )
        )
    return stats


# ============================================================================
# Alternating network / level-field / split-variable loop
# ============================================================================


@dataclass
class AlternatingState:
    """Mutable state of one alternating solve; owned by a single solve at a time."""

    decoder: Decoder
    encoder: Encoder
    level: nn.Parameter
    w: torch.Tensor
    optimizer: torch.optim.Optimizer
    generator: torch.Generator
    iteration: int = 0
    last_w_step: tuple[float, float] = field(default=(0.0, 0.0))


class AlternatingSolver(BaseSolver):
    """One optimizer step on (θ, γ, level field) with w fixed, then the exact w-update.

    Subclasses define the level-field shape, its soft masks, the energy and the hard labels.
    """

    @property
    @abstractmethod
    def latent_dim(self) -> int: ...

    @abstractmethod
    def initial_level(self, image: Image) -> torch.Tensor: ...

    @abstractmethod
    def soft_masks(self, level: torch.Tensor) -> torch.Tensor: ...

    @abstractmethod
    def energy(
        self, state: AlternatingState, image: torch.Tensor, noise: torch.Tensor
    ) -> EnergyTerms: ...

    @abstractmethod
    def hard_labels(self, level: torch.Tensor) -> LabelMask: ...

    def split_target(self, level: torch.Tensor) -> torch.Tensor:
        return forward_grad(self.soft_masks(level))

    def init_state(self, image: Image) -> AlternatingState:
        """Networks seeded from cfg.seed, initial level field, and w = shrink(∇S(level))."""
        spec = self.cfg.network.with_io(image.channels, image.channels)
        spec.check_input(image.height, image.width)
        encoder = Encoder(spec, self.latent_dim, self.hp.reduced_variance, seed=self.cfg.seed)
        decoder = Decoder(spec, self.latent_dim, image.channels, seed=self.cfg.seed + 1)
        level = nn.Parameter(self.initial_level(image))
        with torch.no_grad():
            w = shrinkage(self.split_target(level), self.hp.nu, self.hp.lam)
        optimizer = self.make_optimizer(
            [
                ("decoder", decoder.parameters()),
                ("encoder", encoder.parameters()),
                ("level", [level]),
            ]
        )
        return AlternatingState(
            decoder=decoder,
            encoder=encoder,
            level=level,
            w=w,
            optimizer=optimizer,
            generator=make_generator(self.cfg.seed + 2),
        )

    def noise_shape(self, image: torch.Tensor) -> tuple[int, ...]:
        return (self.hp.mc_samples, 1, self.latent_dim, int(image.shape[-2]), int(image.shape[-1]))

    def step(self, state: AlternatingState, image: torch.Tensor) -> AlternatingState:
        """One alternating iteration; mutates and returns ``state``.

        Raises:
            NumericalAbortError: If gradients or parameters become non-finite
        """
        noise = standard_normal(self.noise_shape(image), state.generator, dtype=image.dtype)
        state.optimizer.zero_grad(set_to_none=True)
        terms = self.energy(state, image, noise)
        terms.total.backward()
        self.check_finite(state.iteration + 1, state.optimizer, float(terms.total.detach()))
        state.optimizer.step()
        self.clip(state.optimizer)
        self.check_finite(state.iteration + 1, state.optimizer, float(terms.total.detach()))

        with torch.no_grad():
            target = self.split_target(state.level)
            # checked in float64 so rounding cannot register as an increase
            target64 = target.double()
            before = float(coupling_energy(state.w.double(), target64, self.hp.nu, self.hp.lam))
            state.w = shrinkage(target, self.hp.nu, self.hp.lam)
            after = float(coupling_energy(state.w.double(), target64, self.hp.nu, self.hp.lam))
        state.last_w_step = (before, after)
        state.iteration += 1
        return state

    def evaluate(
        self, state: AlternatingState, image: torch.Tensor, noise: torch.Tensor
    ) -> EnergyBreakdown:
        """Monitored energy with fixed noise (no gradient)."""
        with torch.no_grad():
            return self.energy(state, image, noise).breakdown()

    def run(self, image: Image) -> tuple[AlternatingState, LabelMask, SolveReport]:
        """Full solve; also returns the final state for inspection."""
        started = time.perf_counter()
        img = as_image_tensor(image)
        state = self.init_state(image)
        monitor_noise = standard_normal(
            self.noise_shape(img), make_generator(self.cfg.seed + 3), dtype=img.dtype
        )
        monitor = self.new_monitor()
        monitor.record(self.evaluate(state, img, monitor_noise))

        stopped_early = False
        for k in range(1, self.cfg.max_iters + 1):
            _ = self.step(state, img)
            monitor.record_w_step(*state.last_w_step)
            breakdown = self.evaluate(state, img, monitor_noise)
            monitor.record(breakdown)
            self.emit(k, breakdown.total)
            if k % 100 == 0:
                logger.debug(f"{self.name}: iteration {k}, E = {breakdown.total:.6g}")
            if monitor.stagnated():
                stopped_early = True
                logger.info(f"{self.name}: energy stagnated after {k} iterations")
                break

        mask = self.hard_labels(state.level)
        report = self.build_report(
            monitor,
            state.iteration,
            started,
            mask,
            stopped_early,
            latent_region_stats(state.encoder, image, mask),
        )
        return state, mask, report

    def solve(self, image: Image) -> tuple[LabelMask, SolveReport]:
        _, mask, report = self.run(image)
        return mask, report
