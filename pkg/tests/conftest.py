# Shared test configuration - tiny network specs, solver settings and synthetic fixtures.
# Integration runs (full solves, CLI end-to-end) live in tests/test_integration/.

import sys
from collections.abc import Iterator
from pathlib import Path

import pytest
import torch
from loguru import logger

from deepcv.imagecore import Image, LabelMask, make_synthetic, save_image, save_mask
from deepcv.models import DatasetTrainerConfig, Hyperparams, NetworkSpec, SolverConfig

# ============================================================================
# NETWORK AND SOLVER SETTINGS
# ============================================================================


@pytest.fixture
def tiny_spec() -> NetworkSpec:
    """One-stage, four-channel U-net; fast enough for per-test construction."""
    return NetworkSpec(depth=1, base_channels=4)


@pytest.fixture
def tiny_solver_cfg(tiny_spec: NetworkSpec) -> SolverConfig:
    return SolverConfig(max_iters=5, seed=0, network=tiny_spec, early_stop=False)


@pytest.fixture
def single_hp() -> Hyperparams:
    return Hyperparams.from_preset("single")


@pytest.fixture
def tiny_trainer_cfg(tiny_spec: NetworkSpec) -> DatasetTrainerConfig:
    return DatasetTrainerConfig(
        epochs=2,
        batch_size=4,
        image_size=16,
        network=tiny_spec,
        discriminator_channels=(4, 8),
        seed=0,
    )


@pytest.fixture
def generator() -> torch.Generator:
    g = torch.Generator()
    _ = g.manual_seed(1234)
    return g


# ============================================================================
# SYNTHETIC FIXTURES
# ============================================================================


@pytest.fixture
def disk() -> tuple[Image, LabelMask]:
    """Noise-free 16×16 bright disk on a dark background."""
    return make_synthetic("two_gaussian_disk", 16, 16, noise_sigma=0.0, seed=0)


@pytest.fixture
def stripes() -> tuple[Image, LabelMask]:
    """18×18 three-band image with light noise."""
    return make_synthetic("three_region_stripes", 18, 18, noise_sigma=5.0, seed=0)


@pytest.fixture
def disk_files(tmp_path: Path, disk: tuple[Image, LabelMask]) -> tuple[Path, Path]:
    """Disk image and its ground-truth mask written as PNGs."""
    image, mask = disk
    image_path = tmp_path / "inputs" / "disk.png"
    mask_path = tmp_path / "inputs" / "disk_truth.png"
    save_image(image, image_path)
    save_mask(mask, mask_path)
    return image_path, mask_path


# ============================================================================
# LOGGING
# ============================================================================


@pytest.fixture(autouse=True)
def reset_logger() -> Iterator[None]:
    """Restore the default loguru sink after tests that reconfigure logging."""
    yield
    logger.remove()
    _ = logger.add(sys.stderr, level="WARNING")
