"""Tests for imagecore.py"""

from pathlib import Path

import numpy as np
import pytest
import torch
from PIL import Image as PILImage

from deepcv.exceptions import ImageIOError, InvalidInputError
from deepcv.imagecore import (
    DatasetLayout,
    DatasetSplit,
    Image,
    LabelMask,
    center_crop_resize,
    center_crop_resize_mask,
    load_image,
    load_mask,
    make_synthetic,
    save_image,
    save_mask,
    sidecar_path,
    write_synthetic_dataset,
)
from tests.test_utils import write_gray_png


class TestImage:
    """Tests for the Image model."""

    def test_gray_from_2d(self):
        """Test a 2-D array becomes a single-channel image."""
        image = Image(data=np.full((4, 5), 0.5))
        assert (image.height, image.width, image.channels) == (4, 5, 1)

    def test_data_is_read_only(self):
        """Test the stored array cannot be modified."""
        image = Image(data=np.zeros((3, 3)))
        with pytest.raises(ValueError):
            image.data[0, 0, 0] = 1.0

    @pytest.mark.parametrize(
        "data",
        [
            np.full((4, 4), 1.5),
            np.full((4, 4), -0.1),
            np.full((4, 4), np.nan),
            np.zeros((1, 5)),
            np.zeros((4, 4, 2)),
        ],
    )
    def test_invalid_data(self, data: np.ndarray):
        """Test range, finiteness, size and channel checks."""
        with pytest.raises(InvalidInputError):
            _ = Image(data=data)

    def test_caller_array_untouched(self):
        """Test the caller's array stays writable and independent of the image."""
        source = np.zeros((2, 2, 1))
        image = Image(data=source)
        source[0, 0, 0] = 0.5
        assert image.data[0, 0, 0] == 0.0

    def test_to_tensor_layout(self):
        """Test to_tensor returns C×H×W."""
        rgb = np.random.default_rng(0).uniform(size=(4, 6, 3))
        tensor = Image(data=rgb).to_tensor(dtype=torch.float64)
        assert tensor.shape == (3, 4, 6)
        assert torch.allclose(tensor[1], torch.from_numpy(rgb[:, :, 1]))

    def test_from_tensor_clips(self):
        """Test from_tensor clips values into [0, 1]."""
        image = Image.from_tensor(torch.tensor([[[-1.0, 0.5], [2.0, 0.25]]]))
        assert image.data[:, :, 0].tolist() == [[0.0, 0.5], [1.0, 0.25]]

    def test_grayscale_of_gray_rgb(self):
        """Test equal RGB channels convert to the same gray level."""
        image = Image(data=np.full((3, 3, 3), 0.4))
        assert np.allclose(image.grayscale(), 0.4)


class TestLabelMask:
    """Tests for the LabelMask model."""

    def test_from_bool(self):
        """Test a boolean indicator becomes a binary mask."""
        mask = LabelMask.from_bool(np.array([[True, False], [False, True]]))
        assert mask.is_binary
        assert mask.labels.tolist() == [[1, 0], [0, 1]]
        assert mask.foreground().tolist() == [[True, False], [False, True]]

    def test_label_range(self):
        """Test labels must lie in [0, N−1]."""
        with pytest.raises(InvalidInputError):
            _ = LabelMask(labels=np.array([[0, 3]]), n_labels=3)

    def test_float_labels_rejected(self):
        """Test labels must be integers."""
        with pytest.raises(InvalidInputError):
            _ = LabelMask(labels=np.array([[0.0, 1.0]]))

    def test_field_constraint_is_invalid_input(self):
        """Test a field constraint failure also raises InvalidInputError."""
        with pytest.raises(InvalidInputError, match="n_labels"):
            _ = LabelMask(labels=np.zeros((2, 2), dtype=np.int64), n_labels=1)

    def test_caller_array_untouched(self):
        """Test the caller's int64 array stays writable."""
        source = np.zeros((2, 2), dtype=np.int64)
        mask = LabelMask(labels=source)
        source[0, 0] = 1
        assert mask.labels[0, 0] == 0


def test_dataset_split_must_be_disjoint():
    """Test a shared identifier between splits is rejected."""
    with pytest.raises(InvalidInputError):
        _ = DatasetSplit(train=["a", "b"], validation=["b"])


class TestRasterIO:
    """Tests for image and mask files."""

    def test_load_missing_image(self, tmp_path: Path):
        """Test a missing file raises ImageIOError."""
        with pytest.raises(ImageIOError):
            _ = load_image(tmp_path / "missing.png")

    def test_load_non_image(self, tmp_path: Path):
        """Test an undecodable file raises ImageIOError."""
        path = tmp_path / "notes.png"
        _ = path.write_text("not an image")
        with pytest.raises(ImageIOError):
            _ = load_image(path)

    def test_image_save_load(self, tmp_path: Path):
        """Test saving and loading keeps intensities to 8-bit precision."""
        image, _ = make_synthetic("texture_overlap", 12, 10, seed=3)
        save_image(image, tmp_path / "img.png")
        loaded = load_image(tmp_path / "img.png")
        assert loaded.channels == 1
        assert np.max(np.abs(loaded.data - image.data)) <= 0.5 / 255 + 1e-9

    def test_rgb_is_preserved(self, tmp_path: Path):
        """Test color rasters load with three channels."""
        PILImage.new("RGB", (4, 3), (255, 0, 0)).save(tmp_path / "red.png")
        image = load_image(tmp_path / "red.png")
        assert image.channels == 3
        assert image.data[0, 0].tolist() == [1.0, 0.0, 0.0]

    def test_binary_mask_file(self, tmp_path: Path):
        """Test binary masks are written as 0/255 without a sidecar."""
        mask = LabelMask.from_bool(np.eye(4, dtype=bool))
        save_mask(mask, tmp_path / "mask.png")
        raw = np.asarray(PILImage.open(tmp_path / "mask.png"))
        assert set(np.unique(raw).tolist()) == {0, 255}
        assert not sidecar_path(tmp_path / "mask.png").exists()
        assert np.array_equal(load_mask(tmp_path / "mask.png").labels, mask.labels)

    def test_multilabel_mask_file(self, tmp_path: Path):
        """Test multi-label masks use gray levels plus a sidecar label map."""
        labels = np.array([[0, 1, 2], [2, 1, 0]])
        save_mask(LabelMask(labels=labels, n_labels=3), tmp_path / "multi.png")
        sidecar = sidecar_path(tmp_path / "multi.png")
        assert sidecar.name == "multi.labels.txt"
        assert "n_labels 3" in sidecar.read_text()
        raw = np.asarray(PILImage.open(tmp_path / "multi.png"))
        assert sorted(np.unique(raw).tolist()) == [0, 128, 255]

        loaded = load_mask(tmp_path / "multi.png")
        assert loaded.n_labels == 3
        assert np.array_equal(loaded.labels, labels)

    def test_plain_raster_mask(self, tmp_path: Path):
        """Test a foreign 0/255 raster loads as a binary mask."""
        PILImage.fromarray(np.array([[0, 200], [255, 10]], dtype=np.uint8)).save(tmp_path / "m.png")
        assert load_mask(tmp_path / "m.png").labels.tolist() == [[0, 1], [1, 0]]

    @pytest.mark.parametrize(("n_labels", "seed"), [(2, 0), (2, 1), (3, 2), (5, 3), (8, 4)])
    def test_random_mask_round_trip(self, tmp_path: Path, n_labels: int, seed: int):
        """Test load(save(mask)) returns the same labels and label count."""
        labels = np.random.default_rng(seed).integers(0, n_labels, size=(9, 13))
        mask = LabelMask(labels=labels, n_labels=n_labels)
        save_mask(mask, tmp_path / "mask.png")
        loaded = load_mask(tmp_path / "mask.png")
        assert loaded.n_labels == mask.n_labels
        assert np.array_equal(loaded.labels, mask.labels)

    def test_tiny_image_is_invalid_input(self, tmp_path: Path):
        """Test a decodable but 1×1 raster raises InvalidInputError."""
        write_gray_png(tmp_path / "dot.png", [[0.5]])
        with pytest.raises(InvalidInputError):
            _ = load_image(tmp_path / "dot.png")

    def test_sidecar_with_too_few_labels(self, tmp_path: Path):
        """Test labels beyond the sidecar's label count raise InvalidInputError."""
        write_gray_png(tmp_path / "m.png", [[0.0, 0.5], [1.0, 1.0]])
        _ = sidecar_path(tmp_path / "m.png").write_text("n_labels 2\n0 0\n1 128\n2 255\n")
        with pytest.raises(InvalidInputError):
            _ = load_mask(tmp_path / "m.png")

    def test_malformed_sidecar(self, tmp_path: Path):
        """Test an unparsable sidecar line is reported with its line number."""
        write_gray_png(tmp_path / "m.png", [[0.0, 1.0]])
        _ = sidecar_path(tmp_path / "m.png").write_text("# label gray\nn_labels three\n")
        with pytest.raises(InvalidInputError, match=":2:"):
            _ = load_mask(tmp_path / "m.png")


def test_center_crop_resize():
    """Test center crop to a square followed by resizing."""
    image = Image(data=np.random.default_rng(0).uniform(size=(20, 30)))
    resized = center_crop_resize(image, 8)
    assert (resized.height, resized.width) == (8, 8)


def test_center_crop_resize_mask_keeps_labels():
    """Test nearest-neighbour mask resizing introduces no new labels."""
    labels = np.zeros((12, 20), dtype=np.int64)
    labels[4:8, 8:12] = 2
    labels[:, :2] = 1
    resized = center_crop_resize_mask(LabelMask(labels=labels, n_labels=3), 6)
    assert resized.shape == (6, 6)
    assert set(np.unique(resized.labels).tolist()) <= {0, 1, 2}
    assert 2 in resized.labels


class TestDatasetLayout:
    """Tests for the dataset directory convention."""

    def test_requires_images_folder(self, tmp_path: Path):
        """Test a root without images/ is rejected."""
        with pytest.raises(InvalidInputError):
            _ = DatasetLayout(tmp_path)

    def test_make_and_load_split(self, tmp_path: Path):
        """Test the default 0.75/0.125/0.125 split is written and read back."""
        layout = write_synthetic_dataset(tmp_path / "data", count=8, size=16, seed=0)
        assert len(layout.list_stems()) == 8

        split = layout.make_split(seed=1)
        assert (len(split.train), len(split.validation), len(split.test)) == (6, 1, 1)
        assert (layout.root / "train.txt").exists()
        assert len(split.masks) == 8

        loaded = layout.load_split()
        assert loaded.train == split.train
        assert loaded.validation == split.validation
        assert loaded.test == split.test

    def test_split_is_seeded_permutation(self, tmp_path: Path):
        """Test the split order depends only on the seed and covers every stem once."""
        first = write_synthetic_dataset(tmp_path / "a", count=12, size=16).make_split(seed=4)
        second = write_synthetic_dataset(tmp_path / "b", count=12, size=16).make_split(seed=4)
        assert (first.train, first.validation, first.test) == (second.train, second.validation, second.test)
        stems = first.train + first.validation + first.test
        assert sorted(stems) == [f"disk_{k:04d}" for k in range(12)]

    def test_load_split_creates_files(self, tmp_path: Path):
        """Test load_split writes split files when none exist."""
        layout = write_synthetic_dataset(tmp_path / "data", count=4, size=16)
        split = layout.load_split(seed=0)
        assert len(split.train) + len(split.validation) + len(split.test) == 4
        assert (layout.root / "val.txt").exists()

    def test_missing_mask(self, tmp_path: Path):
        """Test images without a mask are allowed."""
        layout = write_synthetic_dataset(tmp_path / "data", count=2, size=16)
        (layout.masks_dir / "disk_0000.png").unlink()
        assert layout.mask_path("disk_0000") is None
        assert layout.mask_path("disk_0001") is not None


class TestSynthetic:
    """Tests for synthetic fixtures."""

    def test_disk_noise_free(self):
        """Test the clean disk is 0.8 inside and 0.2 outside."""
        image, mask = make_synthetic("two_gaussian_disk", 32, 32)
        gray = image.data[:, :, 0]
        assert np.allclose(gray[mask.foreground()], 0.8)
        assert np.allclose(gray[~mask.foreground()], 0.2)
        assert 0 < mask.foreground().sum() < 32 * 32

    def test_deterministic(self):
        """Test the same seed gives the same image."""
        a, _ = make_synthetic("two_gaussian_disk", 16, 16, noise_sigma=50, seed=4)
        b, _ = make_synthetic("two_gaussian_disk", 16, 16, noise_sigma=50, seed=4)
        c, _ = make_synthetic("two_gaussian_disk", 16, 16, noise_sigma=50, seed=5)
        assert np.array_equal(a.data, b.data)
        assert not np.array_equal(a.data, c.data)

    def test_noise_level(self):
        """Test the noise standard deviation is sigma / 255."""
        clean, _ = make_synthetic("two_gaussian_disk", 64, 64)
        noisy, _ = make_synthetic("two_gaussian_disk", 64, 64, noise_sigma=20, seed=0)
        deviation = float(np.std(noisy.data - clean.data))
        assert abs(deviation - 20 / 255) < 0.1 * 20 / 255

    def test_stripes(self):
        """Test three horizontal bands labeled 0/1/2 from top to bottom."""
        image, mask = make_synthetic("three_region_stripes", 9, 4)
        assert mask.n_labels == 3
        assert mask.labels[:, 0].tolist() == [0, 0, 0, 1, 1, 1, 2, 2, 2]
        assert np.allclose(image.data[0, :, 0], 0.2)
        assert np.allclose(image.data[-1, :, 0], 0.8)

    def test_texture_overlap(self):
        """Test the textured fixture is a valid binary problem."""
        image, mask = make_synthetic("texture_overlap", 32, 32, seed=2)
        assert mask.is_binary
        assert 0 < mask.foreground().sum() < 32 * 32
        assert image.data.min() >= 0.0
        assert image.data.max() <= 1.0

    def test_invalid_arguments(self):
        """Test unknown kinds, negative noise and tiny sizes are rejected."""
        with pytest.raises(InvalidInputError):
            _ = make_synthetic("checkerboard", 8, 8)
        with pytest.raises(InvalidInputError):
            _ = make_synthetic("two_gaussian_disk", 8, 8, noise_sigma=-1)
        with pytest.raises(InvalidInputError):
            _ = make_synthetic("two_gaussian_disk", 1, 8)
