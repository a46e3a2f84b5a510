"""Runtime preferences resolved from the environment.

Provides centralized handling of the process-level knobs that sit outside a saved run
configuration: the seed override and reproducibility mode.
"""

import os
from dataclasses import dataclass

import torch
from loguru import logger

_TRUTHY = {"1", "true", "yes", "on"}


@dataclass
class RunPref:
    """Process-level runtime preferences.

    All fields default to "no override" and can be customized through environment
    variables.

    Example:
        # Default preferences (no seed override)
        pref = RunPref()

        # From environment variables
        pref = RunPref.from_env()
        seed = pref.resolve_seed(cli_seed)
    """

    seed: int | None = None
    reproducible: bool = False

    @classmethod
    def from_env(cls) -> "RunPref":
        """Create RunPref from environment variables.

        Environment variables:
            SEED: Overrides the seed given on the command line or in a config file
            DEEPCV_REPRODUCIBLE: Enables deterministic kernels when truthy

        Returns:
            RunPref with values from environment or defaults

        Raises:
            ValueError: If SEED is set but not an integer
        """
        default = cls()
        raw_seed = os.getenv("SEED")
        seed = int(raw_seed) if raw_seed not in (None, "") else default.seed

        return cls(
            seed=seed,
            reproducible=os.getenv("DEEPCV_REPRODUCIBLE", "").lower() in _TRUTHY,
        )

    def resolve_seed(self, seed: int) -> int:
        """Apply the environment seed override to a configured seed."""
        if self.seed is not None and self.seed != seed:
            logger.info(f"SEED environment variable overrides seed {seed} -> {self.seed}")
            return self.seed
        return seed


def apply_reproducibility(enabled: bool) -> None:
    """Switch torch into deterministic, single-threaded mode.

    Fixes the floating-point reduction order so that repeated runs with the same
    configuration and seed are bit-identical.
    """
    if not enabled:
        return
    torch.use_deterministic_algorithms(True)
    torch.set_num_threads(1)
    logger.debug("Reproducibility mode: deterministic algorithms, 1 thread")
