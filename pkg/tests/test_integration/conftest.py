"""Fixtures for end-to-end runs of the deepcv command line."""

from pathlib import Path

import pytest
from click.testing import CliRunner, Result

from deepcv.cli import cli
from deepcv.imagecore import DatasetLayout, make_synthetic, save_image, save_mask, write_synthetic_dataset


@pytest.fixture(autouse=True)
def clean_env(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("SEED", raising=False)
    monkeypatch.delenv("DEEPCV_REPRODUCIBLE", raising=False)


@pytest.fixture
def run_cli():
    """Invoke the command group quietly with stringified arguments."""

    def run(*args: str | Path) -> Result:
        return CliRunner().invoke(cli, ["-q", *[str(a) for a in args]])

    return run


@pytest.fixture
def disk_pair(tmp_path: Path):
    """Write a 64×64 two-Gaussian disk with the given noise level (0-255 units) as PNGs."""

    def write(sigma: float) -> tuple[Path, Path]:
        image, truth = make_synthetic("two_gaussian_disk", 64, 64, noise_sigma=sigma, seed=1)
        save_image(image, tmp_path / f"disk_{sigma:g}.png")
        save_mask(truth, tmp_path / f"disk_{sigma:g}_truth.png")
        return tmp_path / f"disk_{sigma:g}.png", tmp_path / f"disk_{sigma:g}_truth.png"

    return write


@pytest.fixture
def stripe_files(tmp_path: Path) -> tuple[Path, Path]:
    image, truth = make_synthetic("three_region_stripes", 24, 24, noise_sigma=0.0, seed=1)
    save_image(image, tmp_path / "stripes.png")
    save_mask(truth, tmp_path / "stripes_truth.png")
    return tmp_path / "stripes.png", tmp_path / "stripes_truth.png"


@pytest.fixture
def toy_dataset(tmp_path: Path) -> DatasetLayout:
    """Sixteen 32×32 disks with masks; split 12/2/2."""
    layout = write_synthetic_dataset(tmp_path / "data", count=16, size=32, seed=0)
    _ = layout.make_split(seed=0)
    return layout
