"""Image and mask I/O, normalization, dataset layout and synthetic fixtures.

Images are H×W×C float arrays in [0, 1] (C ∈ {1, 3}); masks are H×W integer label maps.
Binary masks are stored as 0/255 PNGs, multi-label masks as evenly spaced gray levels with a
sidecar label map next to the PNG.
"""

from __future__ import annotations

from pathlib import Path
from typing import Self

import numpy as np
import torch
from loguru import logger
from PIL import Image as PILImage
from PIL import UnidentifiedImageError
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from skimage.color import rgb2gray

from .config import DeepCVConfig
from .exceptions import DeepCVError, ImageIOError, InvalidInputError
from .types import BoolArray, FloatArray, IntArray, SyntheticKind

SIDECAR_SUFFIX = ".labels.txt"
SPLIT_FILES: dict[str, str] = {"train": "train.txt", "validation": "val.txt", "test": "test.txt"}


class CheckedModel(BaseModel):
    """Model whose validation failures surface as InvalidInputError instead of ValidationError."""

    def __init__(self, **data: object) -> None:
        try:
            super().__init__(**data)
        except ValidationError as e:
            for detail in e.errors():
                original = detail.get("ctx", {}).get("error")
                if isinstance(original, DeepCVError):
                    raise original from e
            messages = "; ".join(f"{'.'.join(map(str, d['loc']))}: {d['msg']}" for d in e.errors())
            raise InvalidInputError(f"Invalid {type(self).__name__}: {messages}") from e


class Image(CheckedModel):
    """H×W×C image with intensities in [0, 1]."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)  # pyright: ignore[reportUnannotatedClassAttribute]

    data: np.ndarray = Field(..., description="H×W×C float64 intensities")  # pyright: ignore[reportMissingTypeArgument]

    @field_validator("data", mode="before")
    @classmethod
    def _validate_data(cls, value: object) -> FloatArray:
        data = np.array(value, dtype=np.float64, copy=True)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise InvalidInputError(f"Image must be H×W×C with C in {{1, 3}}, got {data.shape}")
        if data.shape[0] < 2 or data.shape[1] < 2:
            raise InvalidInputError(f"Image must be at least 2×2, got {data.shape[:2]}")
        if not np.all(np.isfinite(data)) or data.min() < 0.0 or data.max() > 1.0:
            raise InvalidInputError("Image intensities must be finite and lie in [0, 1]")
        data.setflags(write=False)
        return data

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return int(self.data.shape[2])

    def grayscale(self) -> FloatArray:
        """H×W luminance (identity for single-channel images)."""
        if self.channels == 1:
            return self.data[:, :, 0]
        return np.asarray(rgb2gray(self.data), dtype=np.float64)

    def to_tensor(
        self, dtype: torch.dtype = torch.float32, device: torch.device | str = "cpu"
    ) -> torch.Tensor:
        """C×H×W tensor copy of the image."""
        return torch.from_numpy(np.ascontiguousarray(self.data.transpose(2, 0, 1))).to(
            dtype=dtype, device=device
        )

    @classmethod
    def from_tensor(cls, tensor: torch.Tensor) -> Image:
        """Build an Image from a C×H×W tensor (values are clipped to [0, 1])."""
        array = tensor.detach().to("cpu", torch.float64).clamp(0.0, 1.0).numpy()
        return cls(data=array.transpose(1, 2, 0))


class LabelMask(CheckedModel):
    """H×W label map with labels in {0, …, N−1}; for N = 2 label 1 is foreground."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)  # pyright: ignore[reportUnannotatedClassAttribute]

    labels: np.ndarray = Field(..., description="H×W integer labels")  # pyright: ignore[reportMissingTypeArgument]
    n_labels: int = Field(2, ge=2, description="Region count N")

    @field_validator("labels", mode="before")
    @classmethod
    def _validate_labels(cls, value: object) -> IntArray:
        labels = np.array(value, copy=True)
        if labels.dtype == np.bool_:
            labels = labels.astype(np.int64)
        if labels.ndim != 2:
            raise InvalidInputError(f"Mask must be H×W, got shape {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            raise InvalidInputError(f"Mask labels must be integers, got {labels.dtype}")
        labels = labels.astype(np.int64, copy=False)
        labels.setflags(write=False)
        return labels

    @model_validator(mode="after")
    def _check_range(self) -> Self:
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_labels):
            raise InvalidInputError(
                f"Mask labels must lie in [0, {self.n_labels - 1}], "
                f"got [{self.labels.min()}, {self.labels.max()}]"
            )
        return self

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.labels.shape[0]), int(self.labels.shape[1]))

    @property
    def is_binary(self) -> bool:
        return self.n_labels == 2

    def foreground(self) -> BoolArray:
        """Boolean foreground indicator (label 1) of a binary mask."""
        return self.labels == 1

    @classmethod
    def from_bool(cls, indicator: object) -> LabelMask:
        """Binary mask from a boolean / 0-1 array."""
        return cls(labels=np.asarray(indicator).astype(bool).astype(np.int64), n_labels=2)


class DatasetSplit(CheckedModel):
    """Train/validation/test image identifiers (pairwise disjoint)."""

    train: list[str] = Field(default_factory=list)
    validation: list[str] = Field(default_factory=list)
    test: list[str] = Field(default_factory=list)
    masks: dict[str, str] = Field(
        default_factory=dict, description="Image identifier -> mask identifier (optional)"
    )

    @model_validator(mode="after")
    def _disjoint(self) -> Self:
        groups = {"train": set(self.train), "validation": set(self.validation), "test": set(self.test)}
        names = list(groups)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                shared = groups[a] & groups[b]
                if shared:
                    raise InvalidInputError(
                        f"Split lists {a} and {b} share identifiers: {sorted(shared)[:5]}"
                    )
        return self


# ============================================================================
# Raster I/O
# ============================================================================


def load_image(path: Path) -> Image:
    """Load a PNG/JPEG raster as an Image in [0, 1].

    Args:
        path: Raster file path

    Returns:
        Image with channels preserved (gray → 1, color → 3; alpha is dropped)

    Raises:
        ImageIOError: If the file is missing or not decodable
        InvalidInputError: If the image has zero size
    """
    try:
        with PILImage.open(path) as raw:
            raw.load()
            if raw.width == 0 or raw.height == 0:
                raise InvalidInputError(f"{path}: zero-sized image")
            mode = raw.mode
            if mode in ("L", "LA", "1", "I", "I;16", "F"):
                pil = raw.convert("L")
            else:
                pil = raw.convert("RGB")
            array = np.asarray(pil, dtype=np.float64)
    except (FileNotFoundError, UnidentifiedImageError, OSError) as e:
        raise ImageIOError(Path(path), str(e)) from e

    logger.debug(f"Loaded {path} ({mode}, {array.shape})")
    return Image(data=array / 255.0)


def save_image(image: Image, path: Path) -> None:
    """Write an Image as an 8-bit raster."""
    array = np.rint(image.data * 255.0).astype(np.uint8)
    pil = PILImage.fromarray(array[:, :, 0] if image.channels == 1 else array)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        pil.save(path)
    except OSError as e:
        raise ImageIOError(path, str(e)) from e


def _gray_levels(n_labels: int) -> list[int]:
    return [round(k * 255 / (n_labels - 1)) for k in range(n_labels)]


def sidecar_path(path: Path) -> Path:
    """Label-map sidecar file that accompanies a multi-label mask PNG."""
    return path.with_name(path.stem + SIDECAR_SUFFIX)


def save_mask(mask: LabelMask, path: Path) -> None:
    """Write a mask as a single-channel PNG.

    Binary masks use 0/255. Multi-label masks use N evenly spaced gray levels and
    record the label -> gray mapping in a sidecar text file.

    Raises:
        ImageIOError: If the path is not writable
    """
    levels = np.asarray(_gray_levels(mask.n_labels), dtype=np.uint8)
    pil = PILImage.fromarray(levels[mask.labels])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        pil.save(path, format="PNG")
        sidecar = sidecar_path(path)
        if mask.is_binary:
            sidecar.unlink(missing_ok=True)
        else:
            lines = ["# label gray", f"n_labels {mask.n_labels}"]
            lines += [f"{label} {gray}" for label, gray in enumerate(levels.tolist())]
            _ = sidecar.write_text("\n".join(lines) + "\n")
    except OSError as e:
        raise ImageIOError(path, str(e)) from e


def load_mask(path: Path) -> LabelMask:
    """Read a mask written by :func:`save_mask` (or any 0/255 binary raster).

    Raises:
        ImageIOError: If the raster or its sidecar cannot be read
        InvalidInputError: If the sidecar is malformed or the labels exceed its label count
    """
    try:
        with PILImage.open(path) as raw:
            gray = np.asarray(raw.convert("L"), dtype=np.int64)
        sidecar = sidecar_path(path)
        table = sidecar.read_text() if sidecar.exists() else None
    except (FileNotFoundError, UnidentifiedImageError, OSError) as e:
        raise ImageIOError(Path(path), str(e)) from e

    if table is None:
        return LabelMask.from_bool(gray > 127)

    n_labels = 2
    mapping: dict[int, int] = {}
    for number, line in enumerate(table.splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "n_labels":
                n_labels = int(parts[1])
            else:
                mapping[int(parts[1])] = int(parts[0])
        except (IndexError, ValueError) as e:
            raise InvalidInputError(f"{sidecar_path(path)}:{number}: malformed line {line!r}") from e
    if not mapping:
        raise InvalidInputError(f"{sidecar_path(path)}: no label entries")
    lookup = np.zeros(256, dtype=np.int64)
    grays = np.asarray(sorted(mapping), dtype=np.int64)
    # nearest recorded gray level, so lossy re-encodes still decode
    nearest = grays[np.abs(np.arange(256)[:, None] - grays[None, :]).argmin(axis=1)]
    for value in range(256):
        lookup[value] = mapping[int(nearest[value])]
    return LabelMask(labels=lookup[gray], n_labels=n_labels)


def center_crop_resize(image: Image, size: int) -> Image:
    """Center-crop to a square, then bilinearly resize to ``size``×``size``."""
    side = min(image.height, image.width)
    top = (image.height - side) // 2
    left = (image.width - side) // 2
    crop = image.data[top : top + side, left : left + side]
    array = np.rint(crop * 255.0).astype(np.uint8)
    pil = PILImage.fromarray(array[:, :, 0] if image.channels == 1 else array)
    resized = np.asarray(pil.resize((size, size), PILImage.Resampling.BILINEAR), dtype=np.float64)
    return Image(data=resized / 255.0)


def center_crop_resize_mask(mask: LabelMask, size: int) -> LabelMask:
    """Center-crop to a square, then nearest-neighbour resize a label mask."""
    height, width = mask.shape
    side = min(height, width)
    top = (height - side) // 2
    left = (width - side) // 2
    crop = mask.labels[top : top + side, left : left + side].astype(np.uint8)
    resized = PILImage.fromarray(crop).resize((size, size), PILImage.Resampling.NEAREST)
    return LabelMask(labels=np.asarray(resized, dtype=np.int64), n_labels=mask.n_labels)


# ============================================================================
# Dataset directory convention: root/{images,masks}/<stem>.<ext>
# ============================================================================


class DatasetLayout:
    """Directory convention for datasets.

    ``root/images/<stem>.<ext>`` holds the images, ``root/masks/<stem>.png`` the optional
    ground-truth masks, and ``root/{train,val,test}.txt`` one identifier per line.
    """

    def __init__(self, root: Path) -> None:
        """Initialize a layout rooted at ``root``.

        Raises:
            InvalidInputError: If root or root/images does not exist
        """
        self.root: Path = Path(root)
        self.images_dir: Path = self.root / "images"
        self.masks_dir: Path = self.root / "masks"
        if not self.images_dir.is_dir():
            raise InvalidInputError(f"Dataset directory has no images/ folder: {self.root}")

    def list_stems(self) -> list[str]:
        """Sorted identifiers of all images."""
        return sorted(
            p.stem
            for p in self.images_dir.iterdir()
            if p.suffix.lower() in DeepCVConfig.IMAGE_EXTENSIONS
        )

    def image_path(self, stem: str) -> Path:
        for ext in DeepCVConfig.IMAGE_EXTENSIONS:
            candidate = self.images_dir / f"{stem}{ext}"
            if candidate.exists():
                return candidate
        raise ImageIOError(self.images_dir / stem, "no image with a supported extension")

    def mask_path(self, stem: str) -> Path | None:
        candidate = self.masks_dir / f"{stem}.png"
        return candidate if candidate.exists() else None

    def make_split(
        self,
        fractions: tuple[float, float, float] = DeepCVConfig.DATASET_SPLIT_FRACTIONS,
        seed: int = 0,
    ) -> DatasetSplit:
        """Shuffle identifiers with ``seed``, split by ``fractions`` and write the split files."""
        stems = self.list_stems()
        stems = [stems[i] for i in np.random.default_rng(seed).permutation(len(stems))]
        n_train = int(round(fractions[0] * len(stems)))
        n_val = int(round(fractions[1] * len(stems)))
        split = DatasetSplit(
            train=stems[:n_train],
            validation=stems[n_train : n_train + n_val],
            test=stems[n_train + n_val :],
            masks={s: s for s in stems if self.mask_path(s) is not None},
        )
        for field, filename in SPLIT_FILES.items():
            ids: list[str] = getattr(split, field)
            _ = (self.root / filename).write_text("".join(f"{i}\n" for i in ids))
        logger.info(
            f"Wrote split for {self.root}: "
            f"{len(split.train)}/{len(split.validation)}/{len(split.test)}"
        )
        return split

    def load_split(self, seed: int = 0) -> DatasetSplit:
        """Read train/val/test files, creating them first if none exist."""
        files = {field: self.root / name for field, name in SPLIT_FILES.items()}
        if not any(f.exists() for f in files.values()):
            return self.make_split(seed=seed)
        lists = {
            field: [line.strip() for line in f.read_text().splitlines() if line.strip()]
            if f.exists()
            else []
            for field, f in files.items()
        }
        masks = {
            s: s for ids in lists.values() for s in ids if self.mask_path(s) is not None
        }
        return DatasetSplit(**lists, masks=masks)


# ============================================================================
# Synthetic fixtures
# ============================================================================


def _disk(n: int, m: int, cy: float, cx: float, radius: float) -> BoolArray:
    yy, xx = np.mgrid[0:n, 0:m]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2


def make_synthetic(
    kind: SyntheticKind | str,
    n: int,
    m: int,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> tuple[Image, LabelMask]:
    """Generate a synthetic single-channel image with its ground-truth mask.

    Args:
        kind: "two_gaussian_disk" (disk 0.8 on 0.2), "three_region_stripes" (three
            horizontal bands 0.2/0.5/0.8, labels 0/1/2 top to bottom), or
            "texture_overlap" (striped disk on a noisy background with overlapping
            intensity histograms; disk placement jitters with ``seed``)
        n: Height in pixels
        m: Width in pixels
        noise_sigma: Additive Gaussian noise std in 0–255 units (divided by 255)
        seed: Seed of every random draw

    Returns:
        Tuple of (image clipped to [0, 1], ground-truth mask)

    Raises:
        InvalidInputError: If kind is unknown, the size is degenerate or sigma < 0
    """
    if noise_sigma < 0:
        raise InvalidInputError(f"noise_sigma must be >= 0, got {noise_sigma}")
    if n < 2 or m < 2:
        raise InvalidInputError(f"Synthetic image must be at least 2×2, got {n}×{m}")
    rng = np.random.default_rng(seed)

    if kind == "two_gaussian_disk":
        inside = _disk(n, m, (n - 1) / 2, (m - 1) / 2, min(n, m) / 4)
        clean = np.where(inside, 0.8, 0.2)
        mask = LabelMask.from_bool(inside)
    elif kind == "three_region_stripes":
        rows = np.arange(n)[:, None] * np.ones((1, m), dtype=np.int64)
        labels = (rows >= n // 3).astype(np.int64) + (rows >= 2 * n // 3).astype(np.int64)
        clean = np.asarray([0.2, 0.5, 0.8])[labels]
        mask = LabelMask(labels=labels, n_labels=3)
    elif kind == "texture_overlap":
        cy = n / 2 + rng.uniform(-n / 8, n / 8)
        cx = m / 2 + rng.uniform(-m / 8, m / 8)
        inside = _disk(n, m, cy, cx, min(n, m) * rng.uniform(0.22, 0.3))
        stripes = np.where((np.arange(m)[None, :] // 2) % 2 == 0, 0.25, 0.75) * np.ones((n, 1))
        fg = stripes + rng.normal(0.0, 0.05, size=(n, m))
        bg = 0.5 + rng.normal(0.0, 0.15, size=(n, m))
        clean = np.where(inside, fg, bg)
        mask = LabelMask.from_bool(inside)
    else:
        raise InvalidInputError(
            f"Unknown synthetic kind: {kind}. "
            "Available: ['two_gaussian_disk', 'three_region_stripes', 'texture_overlap']"
        )

    noisy = clean + rng.normal(0.0, noise_sigma / 255.0, size=clean.shape) if noise_sigma else clean
    return Image(data=np.clip(noisy, 0.0, 1.0)), mask


def write_synthetic_dataset(root: Path, count: int, size: int, seed: int = 0) -> DatasetLayout:
    """Write a toy disk dataset (varied radius, position and contrast) in the dataset layout."""
    rng = np.random.default_rng(seed)
    images_dir = root / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    for k in range(count):
        radius = rng.uniform(0.18, 0.32) * size
        cy, cx = rng.uniform(0.35, 0.65, size=2) * size
        inside = _disk(size, size, cy, cx, radius)
        fg, bg = rng.uniform(0.6, 0.9), rng.uniform(0.1, 0.4)
        if rng.random() < 0.5:
            fg, bg = bg, fg
        clean = np.where(inside, fg, bg) + rng.normal(0.0, 0.03, size=(size, size))
        save_image(Image(data=np.clip(clean, 0.0, 1.0)), images_dir / f"disk_{k:04d}.png")
        save_mask(LabelMask.from_bool(inside), root / "masks" / f"disk_{k:04d}.png")
    return DatasetLayout(root)
