"""Level-field initialization: Otsu, centered box, random, or an external mask."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from loguru import logger
from skimage.filters import threshold_multiotsu, threshold_otsu

from ..config import DeepCVConfig
from ..distributions import make_generator
from ..exceptions import InvalidInputError
from ..imagecore import Image, LabelMask, load_mask
from ..types import LevelField

_MASK_PREFIXES = ("from_mask:", "mask:")


def parse_init_mode(mode: str) -> tuple[str, Path | None]:
    """Normalize an init mode string.

    Returns:
        Tuple of (canonical mode, mask path) where mode is one of
        "otsu", "center_box", "random", "from_mask"

    Raises:
        InvalidInputError: If the mode is unknown
    """
    for prefix in _MASK_PREFIXES:
        if mode.startswith(prefix):
            path = mode[len(prefix) :]
            if not path:
                raise InvalidInputError(f"Init mode {mode!r} is missing a mask path")
            return "from_mask", Path(path)
    aliases = {"otsu": "otsu", "center": "center_box", "center_box": "center_box", "random": "random"}
    if mode not in aliases:
        raise InvalidInputError(
            f"Unknown init mode: {mode}. Available: {sorted(aliases)} or mask:PATH"
        )
    return aliases[mode], None


def _signed(indicator: np.ndarray) -> torch.Tensor:  # pyright: ignore[reportMissingTypeArgument]
    return torch.from_numpy(np.where(indicator, 1.0, -1.0)).to(torch.float32)


def center_box(height: int, width: int) -> np.ndarray:  # pyright: ignore[reportMissingTypeArgument]
    """Boolean indicator of the centered box with half the image's height and width."""
    box = np.zeros((height, width), dtype=bool)
    top, left = height // 4, width // 4
    box[top : top + max(height // 2, 1), left : left + max(width // 2, 1)] = True
    return box


def init_level_set(image: Image, mode: str = "otsu", seed: int = 0) -> LevelField:
    """Initial binary level field φ (H, W).

    Args:
        image: Image to segment
        mode: "otsu" (+1 above the grayscale Otsu threshold, −1 below), "center_box"/"center"
            (+1 on the centered half-size box), "random" (uniform in ±0.1 per seed), or
            "from_mask:PATH" / "mask:PATH" (±1 from a saved binary mask)
        seed: Seed of the random mode

    Returns:
        Float32 tensor (H, W)

    Raises:
        InvalidInputError: If the mode is unknown or a supplied mask has the wrong size
        ImageIOError: If the mask file cannot be read
    """
    canonical, path = parse_init_mode(mode)
    height, width = image.height, image.width

    if canonical == "otsu":
        gray = image.grayscale()
        if float(gray.max() - gray.min()) == 0.0:
            logger.warning("Otsu threshold undefined on a constant image; using center_box")
            return _signed(center_box(height, width))
        return _signed(gray > threshold_otsu(gray))
    if canonical == "center_box":
        return _signed(center_box(height, width))
    if canonical == "random":
        amplitude = DeepCVConfig.RANDOM_INIT_AMPLITUDE
        draw = torch.rand((height, width), generator=make_generator(seed))
        return (2.0 * draw - 1.0) * amplitude

    assert path is not None
    mask = load_mask(path)
    if mask.shape != (height, width):
        raise InvalidInputError(
            f"Initial mask {path} is {mask.shape}, image is {(height, width)}"
        )
    return _signed(mask.labels > 0)


def init_multiphase_level(image: Image, n_phases: int, mode: str = "random", seed: int = 0) -> LevelField:
    """Initial multi-phase level field Φ (N, H, W).

    "random" draws every channel uniformly in ±0.1. "otsu" uses N-class multi-level Otsu on the
    grayscale image (+1 on the assigned channel, −1 elsewhere) and falls back to random when the
    image has too few distinct intensities. "from_mask:PATH" uses a saved N-label mask.

    Raises:
        InvalidInputError: If the mode is unsupported here or the mask does not fit
    """
    canonical, path = parse_init_mode(mode)
    height, width = image.height, image.width
    amplitude = DeepCVConfig.RANDOM_INIT_AMPLITUDE

    labels: np.ndarray | None = None  # pyright: ignore[reportMissingTypeArgument]
    if canonical == "otsu":
        gray = image.grayscale()
        try:
            thresholds = threshold_multiotsu(gray, classes=n_phases)
            labels = np.digitize(gray, bins=thresholds)
        except ValueError as e:
            logger.warning(f"Multi-level Otsu failed ({e}); using random initialization")
    elif canonical == "from_mask":
        assert path is not None
        mask = load_mask(path)
        if mask.shape != (height, width) or mask.n_labels != n_phases:
            raise InvalidInputError(
                f"Initial mask {path} is {mask.shape} with {mask.n_labels} labels; "
                f"expected {(height, width)} with {n_phases}"
            )
        labels = mask.labels
    elif canonical == "center_box":
        raise InvalidInputError("center_box initialization is only defined for two phases")

    if labels is None:
        draw = torch.rand((n_phases, height, width), generator=make_generator(seed))
        return (2.0 * draw - 1.0) * amplitude
    one_hot = np.stack([labels == k for k in range(n_phases)])
    return _signed(one_hot)
