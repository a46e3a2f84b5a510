"""Tests for solvers/dataset.py"""

import shutil
from pathlib import Path

import numpy as np
import pytest
import torch

from deepcv.exceptions import InvalidInputError
from deepcv.imagecore import DatasetSplit, Image, write_synthetic_dataset
from deepcv.models import DatasetTrainerConfig, Hyperparams, NetworkSpec
from deepcv.networks import Segmenter
from deepcv.solvers import DatasetTrainer, infer_dataset, load_segmenter, train_dataset
from deepcv.solvers.dataset import BEST_CHECKPOINT, load_dataset_images, match_channels


@pytest.fixture
def dataset_hp() -> Hyperparams:
    return Hyperparams.from_preset("dataset")


class TestMatchChannels:
    """Tests for channel conversion."""

    def test_gray_to_color(self):
        """Test a gray image is repeated into three channels."""
        image = match_channels(Image(data=np.full((4, 4), 0.3)), 3)
        assert image.channels == 3
        assert np.allclose(image.data, 0.3)

    def test_color_to_gray(self):
        """Test a color image is reduced to luminance."""
        image = match_channels(Image(data=np.full((4, 4, 3), 0.6)), 1)
        assert image.channels == 1
        assert np.allclose(image.data, 0.6)


def test_infer_dataset(tiny_spec: NetworkSpec):
    """Test inference returns a binary mask of the input size."""
    segmenter = Segmenter(tiny_spec, seed=0)
    mask = infer_dataset(segmenter, Image(data=np.random.default_rng(0).uniform(size=(16, 16))))
    assert mask.shape == (16, 16)
    assert mask.is_binary


def test_load_dataset_images(tmp_path: Path):
    """Test images are cropped, resized and stacked with their masks."""
    layout = write_synthetic_dataset(tmp_path / "data", count=3, size=20)
    images, masks = load_dataset_images(layout, layout.list_stems(), size=8)
    assert images.shape == (3, 1, 8, 8)
    assert all(m is not None and m.shape == (8, 8) for m in masks)


class TestTrainBatch:
    """Tests for the four per-batch updates."""

    def test_all_losses(self, dataset_hp: Hyperparams, tiny_trainer_cfg: DatasetTrainerConfig):
        """Test every loss is reported and finite."""
        trainer = DatasetTrainer(dataset_hp, tiny_trainer_cfg, channels=1)
        losses = trainer.train_batch(torch.rand(4, 1, 16, 16, generator=torch.Generator().manual_seed(0)))
        assert set(losses) == {"energy", "aug_bce", "disc_bce", "cri"}
        assert all(np.isfinite(v) for v in losses.values())
        assert losses["aug_bce"] > 0
        assert losses["cri"] > 0

    def test_regularizers_off(self, dataset_hp: Hyperparams, tiny_trainer_cfg: DatasetTrainerConfig):
        """Test disabled regularizers report zero."""
        cfg = tiny_trainer_cfg.model_copy(update={"use_aui": False, "use_cri": False})
        trainer = DatasetTrainer(dataset_hp, cfg, channels=1)
        losses = trainer.train_batch(torch.rand(4, 1, 16, 16))
        assert losses["aug_bce"] == 0.0
        assert losses["disc_bce"] == 0.0
        assert losses["cri"] == 0.0

    def test_discriminator_size_check(self, dataset_hp: Hyperparams, tiny_spec: NetworkSpec):
        """Test the image size must survive every discriminator stride."""
        cfg = DatasetTrainerConfig(image_size=18, network=tiny_spec, discriminator_channels=(4, 8))
        with pytest.raises(InvalidInputError):
            _ = DatasetTrainer(dataset_hp, cfg, channels=1)


class TestTrainDataset:
    """Tests for full (tiny) training runs."""

    def test_selects_by_validation_miou(
        self, tmp_path: Path, dataset_hp: Hyperparams, tiny_trainer_cfg: DatasetTrainerConfig
    ):
        """Test per-epoch checkpoints and best-epoch selection with validation masks."""
        layout = write_synthetic_dataset(tmp_path / "data", count=8, size=16)
        split = layout.make_split(seed=0)
        epochs_seen: list[int] = []
        _, report = train_dataset(
            layout,
            split,
            dataset_hp,
            tiny_trainer_cfg,
            tmp_path / "ckpt",
            on_epoch=lambda r: epochs_seen.append(r.epoch),
        )
        assert epochs_seen == [1, 2]
        assert report.selected_by == "val_miou"
        assert report.best_epoch in (1, 2)
        assert all(r.val_miou is not None for r in report.epochs)
        assert (tmp_path / "ckpt" / "segmenter_epoch_001.npz").exists()
        assert (tmp_path / "ckpt" / "segmenter_epoch_002.json").exists()

        segmenter, size = load_segmenter(tmp_path / "ckpt", BEST_CHECKPOINT)
        assert size == 16
        assert infer_dataset(segmenter, torch.rand(1, 16, 16)).shape == (16, 16)

    def test_final_epoch_without_masks(
        self, tmp_path: Path, dataset_hp: Hyperparams, tiny_trainer_cfg: DatasetTrainerConfig
    ):
        """Test the last epoch is selected when no validation masks exist."""
        layout = write_synthetic_dataset(tmp_path / "data", count=8, size=16)
        shutil.rmtree(layout.masks_dir)
        _, report = train_dataset(
            layout, layout.make_split(seed=0), dataset_hp, tiny_trainer_cfg, tmp_path / "ckpt"
        )
        assert report.selected_by == "final"
        assert report.best_epoch == 2
        assert all(r.val_miou is None for r in report.epochs)

    def test_empty_training_split(
        self, tmp_path: Path, dataset_hp: Hyperparams, tiny_trainer_cfg: DatasetTrainerConfig
    ):
        """Test a split without training images is rejected."""
        layout = write_synthetic_dataset(tmp_path / "data", count=2, size=16)
        with pytest.raises(InvalidInputError):
            _ = train_dataset(
                layout, DatasetSplit(test=layout.list_stems()), dataset_hp, tiny_trainer_cfg, tmp_path
            )
