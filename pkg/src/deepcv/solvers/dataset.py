"""Dataset-based segmentation: learn a segmentation network U over many images.

Each mini-batch runs four updates in order:
1. F, G, U on the dataset energy (reconstruction + U-weighted KL)
2. U on the augmentation-invariance BCE (optional)
3. D on real images versus decoded pure-foreground / pure-background prior samples (optional)
4. U on the region-conservation loss with F and D frozen (optional, with 3)
"""

from __future__ import annotations

import time
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np
import torch
from loguru import logger

from ..augment import Augmentation
from ..checkpoint import load_checkpoint, restore_into, save_checkpoint
from ..distributions import make_generator
from ..energies import (
    aug_invariance_bce,
    cri_loss,
    dataset_energy,
    discriminator_bce,
    fake_region_images,
)
from ..exceptions import InvalidInputError, NumericalAbortError
from ..imagecore import (
    DatasetLayout,
    DatasetSplit,
    Image,
    LabelMask,
    center_crop_resize,
    center_crop_resize_mask,
    load_image,
    load_mask,
)
from ..metrics import binary_scores
from ..models import DatasetTrainerConfig, Hyperparams, NetworkSpec
from ..networks import Decoder, Discriminator, Encoder, Segmenter, build_discriminator
from ..report_models import EpochRecord, TrainingReport
from ..types import JSONObject

BEST_CHECKPOINT = "best_segmenter"

type OnEpochCallback = Callable[[EpochRecord], None] | None


def match_channels(image: Image, channels: int) -> Image:
    """Convert between gray and color so every image in a dataset has ``channels`` channels."""
    if image.channels == channels:
        return image
    if channels == 1:
        return Image(data=image.grayscale())
    return Image(data=np.repeat(image.data, 3, axis=2))


def load_dataset_images(
    layout: DatasetLayout, ids: Sequence[str], size: int, channels: int | None = None
) -> tuple[torch.Tensor, list[LabelMask | None]]:
    """Load, crop and resize images (and masks where present) of a split.

    Returns:
        Tuple of (B×C×size×size tensor, per-image masks or None)
    """
    images: list[Image] = []
    masks: list[LabelMask | None] = []
    for stem in ids:
        image = center_crop_resize(load_image(layout.image_path(stem)), size)
        if channels is None:
            channels = image.channels
        images.append(match_channels(image, channels))
        mask_path = layout.mask_path(stem)
        masks.append(
            center_crop_resize_mask(load_mask(mask_path), size) if mask_path is not None else None
        )
    if not images:
        return torch.empty(0), masks
    return torch.stack([image.to_tensor() for image in images]), masks


def infer_dataset(segmenter: Segmenter, image: Image | torch.Tensor) -> LabelMask:
    """Hard mask U(I) > 0.5 from a single forward pass (0.5 itself is background).

    Raises:
        InvalidInputError: If the image size does not fit the network
    """
    tensor = image.to_tensor() if isinstance(image, Image) else image
    with torch.no_grad():
        probability = segmenter(tensor.unsqueeze(0))[0]
    return LabelMask.from_bool((probability > 0.5).numpy())


def _validation_scores(
    segmenter: Segmenter, images: torch.Tensor, masks: list[LabelMask | None]
) -> tuple[float, float] | None:
    scored = [
        binary_scores(f"val_{k}", infer_dataset(segmenter, images[k]), mask)
        for k, mask in enumerate(masks)
        if mask is not None
    ]
    if not scored:
        return None
    return float(np.mean([s.acc for s in scored])), float(np.mean([s.miou for s in scored]))


class DatasetTrainer:
    """Owns F, G, U, D and their optimizers for one training run."""

    def __init__(
        self,
        hp: Hyperparams,
        cfg: DatasetTrainerConfig,
        channels: int,
        on_epoch: OnEpochCallback = None,
    ) -> None:
        self.hp: Hyperparams = hp
        self.cfg: DatasetTrainerConfig = cfg
        self.on_epoch: OnEpochCallback = on_epoch
        self.spec: NetworkSpec = cfg.network.with_io(channels, channels)
        self.spec.check_input(cfg.image_size, cfg.image_size)

        seed = cfg.seed
        self.encoder: Encoder = Encoder(self.spec, hp.d, hp.reduced_variance, seed=seed)
        self.decoder: Decoder = Decoder(self.spec, hp.d, channels, seed=seed + 1)
        self.segmenter: Segmenter = Segmenter(self.spec, seed=seed + 2)
        self.discriminator: Discriminator = build_discriminator(self.spec, seed + 3, cfg.discriminator_channels)
        self.discriminator.spec.check_input(cfg.image_size, cfg.image_size)

        betas = cfg.betas
        lr = cfg.learning_rate
        self.opt_energy: torch.optim.Optimizer = torch.optim.Adam(
            [
                *self.decoder.parameters(),
                *self.encoder.parameters(),
                *self.segmenter.parameters(),
            ],
            lr=lr,
            betas=betas,
        )
        self.opt_segmenter: torch.optim.Optimizer = torch.optim.Adam(
            self.segmenter.parameters(), lr=lr, betas=betas
        )
        self.opt_discriminator: torch.optim.Optimizer = torch.optim.Adam(
            self.discriminator.parameters(), lr=lr, betas=betas
        )
        self.generator: torch.Generator = make_generator(seed + 4)

    def train_batch(self, batch: torch.Tensor) -> dict[str, float]:
        """The four per-batch updates; returns their loss values."""
        losses = {"energy": 0.0, "aug_bce": 0.0, "disc_bce": 0.0, "cri": 0.0}

        self.opt_energy.zero_grad(set_to_none=True)
        terms = dataset_energy(
            self.decoder, self.encoder, self.segmenter, batch, self.hp, generator=self.generator
        )
        terms.total.backward()
        self.opt_energy.step()
        losses["energy"] = float(terms.total.detach())

        if self.cfg.use_aui:
            op = Augmentation.sample(self.generator)
            self.opt_segmenter.zero_grad(set_to_none=True)
            loss = aug_invariance_bce(self.segmenter, batch, op)
            loss.backward()
            self.opt_segmenter.step()
            losses["aug_bce"] = float(loss.detach())

        if self.cfg.use_cri:
            count, _, height, width = batch.shape
            with torch.no_grad():
                fake_fg, fake_bg = fake_region_images(
                    self.decoder, self.hp, count, height, width, self.generator
                )
            self.opt_discriminator.zero_grad(set_to_none=True)
            loss = discriminator_bce(self.discriminator, batch, fake_fg, fake_bg)
            loss.backward()
            self.opt_discriminator.step()
            losses["disc_bce"] = float(loss.detach())

            self.opt_segmenter.zero_grad(set_to_none=True)
            loss = cri_loss(
                self.segmenter, self.decoder, self.discriminator, batch, self.hp, self.generator
            )
            loss.backward()
            self.opt_segmenter.step()
            losses["cri"] = float(loss.detach())

        for name, value in losses.items():
            if not np.isfinite(value):
                raise NumericalAbortError(-1, {"loss": name, "value": str(value)})
        return losses

    def save(self, directory: Path, name: str, metadata: JSONObject) -> None:
        _ = save_checkpoint(
            self.segmenter,
            directory,
            name,
            self.spec,
            metadata={"image_size": self.cfg.image_size, "channels": self.spec.in_channels, **metadata},
        )

    def fit(
        self,
        train: torch.Tensor,
        val_images: torch.Tensor,
        val_masks: list[LabelMask | None],
        checkpoint_dir: Path,
    ) -> TrainingReport:
        """Run every epoch, checkpoint U after each, and select the best epoch."""
        started = time.perf_counter()
        records: list[EpochRecord] = []
        order_generator = make_generator(self.cfg.seed + 5)

        for epoch in range(1, self.cfg.epochs + 1):
            permutation = torch.randperm(train.shape[0], generator=order_generator)
            sums = {"energy": 0.0, "aug_bce": 0.0, "disc_bce": 0.0, "cri": 0.0}
            batches = 0
            for start in range(0, train.shape[0], self.cfg.batch_size):
                batch = train[permutation[start : start + self.cfg.batch_size]]
                for name, value in self.train_batch(batch).items():
                    sums[name] += value
                batches += 1

            scores = _validation_scores(self.segmenter, val_images, val_masks) if val_masks else None
            record = EpochRecord(
                epoch=epoch,
                **{name: value / batches for name, value in sums.items()},
                val_acc=scores[0] if scores else None,
                val_miou=scores[1] if scores else None,
            )
            records.append(record)
            self.save(
                checkpoint_dir,
                f"segmenter_epoch_{epoch:03d}",
                {"epoch": epoch, "val_miou": record.val_miou},
            )
            logger.info(
                f"Epoch {epoch}/{self.cfg.epochs}: energy {record.energy:.4g}, "
                f"aug {record.aug_bce:.4g}, disc {record.disc_bce:.4g}, cri {record.cri:.4g}, "
                f"val mIoU {record.val_miou if record.val_miou is not None else 'n/a'}"
            )
            if self.on_epoch is not None:
                self.on_epoch(record)

        scored = [r for r in records if r.val_miou is not None]
        if scored:
            best = max(scored, key=lambda r: (r.val_miou, -r.epoch))
            selected_by = "val_miou"
        else:
            logger.warning("No validation masks; selecting the final epoch checkpoint")
            best = records[-1]
            selected_by = "final"

        state, manifest = load_checkpoint(checkpoint_dir, f"segmenter_epoch_{best.epoch:03d}")
        _ = self.segmenter.load_state_dict(state)
        self.save(
            checkpoint_dir,
            BEST_CHECKPOINT,
            {"epoch": best.epoch, "val_miou": best.val_miou, "selected_by": selected_by},
        )
        logger.debug(f"Best checkpoint restored from {manifest.name}")
        return TrainingReport(
            epochs=records,
            best_epoch=best.epoch,
            selected_by=selected_by,
            wall_time=time.perf_counter() - started,
            seed=self.cfg.seed,
        )


def train_dataset(
    layout: DatasetLayout,
    split: DatasetSplit,
    hp: Hyperparams,
    cfg: DatasetTrainerConfig,
    checkpoint_dir: Path,
    on_epoch: OnEpochCallback = None,
) -> tuple[Segmenter, TrainingReport]:
    """Train F, G, U (and D) on the training split and return the selected U.

    Args:
        layout: Dataset directory convention
        split: Train/validation/test identifiers
        hp: Hyperparameters (typically the "dataset" preset: μ₁ = −3, μ₂ = 3, d = 1)
        cfg: Trainer settings (epochs, batch size, regularizer flags, ...)
        checkpoint_dir: Where per-epoch and best checkpoints are written
        on_epoch: Optional callback per finished epoch

    Returns:
        Tuple of (segmenter restored to the best epoch, training report)

    Raises:
        InvalidInputError: If the training split is empty
    """
    if not split.train:
        raise InvalidInputError(f"Training split of {layout.root} is empty")
    train, _ = load_dataset_images(layout, split.train, cfg.image_size)
    channels = int(train.shape[1])
    val_images, val_masks = load_dataset_images(layout, split.validation, cfg.image_size, channels)
    logger.info(
        f"Training on {train.shape[0]} images ({channels} channels, {cfg.image_size}px), "
        f"{sum(m is not None for m in val_masks)} validation masks, "
        f"AuI={'on' if cfg.use_aui else 'off'}, CRI={'on' if cfg.use_cri else 'off'}"
    )
    trainer = DatasetTrainer(hp, cfg, channels, on_epoch)
    report = trainer.fit(train, val_images, val_masks, checkpoint_dir)
    return trainer.segmenter, report


def load_segmenter(checkpoint_dir: Path, name: str = BEST_CHECKPOINT) -> tuple[Segmenter, int]:
    """Rebuild a trained U from a checkpoint.

    Returns:
        Tuple of (segmenter, training image size)
    """
    _, manifest = load_checkpoint(checkpoint_dir, name)
    segmenter = Segmenter(manifest.spec, seed=0)
    _ = restore_into(segmenter, checkpoint_dir, name)
    segmenter.eval()
    size = manifest.metadata.get("image_size")
    return segmenter, int(size) if isinstance(size, int) else 0
