"""Tests for cli.py"""

import csv
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner, Result

from deepcv.checkpoint import save_checkpoint
from deepcv.cli import cli, merge_flat
from deepcv.imagecore import Image, LabelMask, load_image, load_mask, save_image, save_mask, sidecar_path
from deepcv.metrics import matched_multiphase_miou
from deepcv.models import NetworkSpec
from deepcv.networks import Segmenter
from deepcv.report_models import EnergyBreakdown, EvalSummary, SolveReport
from deepcv.run_config import FlatConfig, load_run_config
from deepcv.traces import write_rows, write_trace_csv
from tests.test_utils import write_gray_png

TINY = ["--depth", "1", "--base-channels", "4"]


@pytest.fixture(autouse=True)
def clean_env(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("SEED", raising=False)
    monkeypatch.delenv("DEEPCV_REPRODUCIBLE", raising=False)


def invoke(*args: str | Path, env: dict[str, str] | None = None) -> Result:
    return CliRunner().invoke(cli, ["-q", *[str(a) for a in args]], env=env)


def _read_csv(path: Path) -> list[dict[str, str]]:
    with path.open(newline="") as f:
        return list(csv.DictReader(f))


class TestSegment:
    """Tests for the segment command."""

    def test_zero_iterations(self, tmp_path: Path, disk_files: tuple[Path, Path]):
        """Test outputs of a run that keeps the Otsu mask."""
        image_path, truth_path = disk_files
        out = tmp_path / "out" / "mask.png"
        result = invoke("segment", "--input", image_path, "--out", out, "--iters", "0", "--truth", truth_path, *TINY)
        assert result.exit_code == 0, result.output

        assert np.array_equal(load_mask(out).labels, load_mask(truth_path).labels)
        report = SolveReport.model_validate_json((out.parent / "report.json").read_text())
        assert report.iterations == 0
        assert len(_read_csv(out.parent / "trace.csv")) == 1

        config = load_run_config(out.parent / "run_config.toml")
        assert config.command == "segment"
        assert config.paths == {"input": str(image_path), "out": str(out)}
        assert config.solver is not None and config.solver.max_iters == 0
        assert config.solver.network.depth == 1

    def test_short_run(self, tmp_path: Path, disk_files: tuple[Path, Path]):
        """Test a few iterations with custom priors."""
        image_path, _ = disk_files
        out = tmp_path / "mask.png"
        result = invoke(
            "segment", "--input", image_path, "--out", out, "--iters", "2",
            "--mu1", "3", "--mu2", "-3", "--latent-dim", "2", *TINY,
        )
        assert result.exit_code == 0, result.output
        config = load_run_config(tmp_path / "run_config.toml")
        assert config.hp is not None
        assert [p.mean for p in config.hp.priors] == [[3.0, 3.0], [-3.0, -3.0]]
        assert len(_read_csv(tmp_path / "trace.csv")) == 3

    def test_seed_env_overrides(self, tmp_path: Path, disk_files: tuple[Path, Path]):
        """Test SEED replaces the --seed value everywhere."""
        image_path, _ = disk_files
        out = tmp_path / "mask.png"
        result = invoke(
            "segment", "--input", image_path, "--out", out, "--iters", "0", "--seed", "3", *TINY,
            env={"SEED": "7"},
        )
        assert result.exit_code == 0, result.output
        config = load_run_config(tmp_path / "run_config.toml")
        assert config.seed == 7
        assert config.solver is not None and config.solver.seed == 7

    def test_config_replay(self, tmp_path: Path, disk_files: tuple[Path, Path]):
        """Test config file values apply unless a flag is given explicitly."""
        image_path, _ = disk_files
        first = tmp_path / "first" / "mask.png"
        assert invoke("segment", "--input", image_path, "--out", first, "--iters", "0", "--nu", "1.5", *TINY).exit_code == 0

        second = tmp_path / "second" / "mask.png"
        result = invoke("segment", "--config", first.parent / "run_config.toml", "--out", second, "--nu", "2.0")
        assert result.exit_code == 0, result.output
        config = load_run_config(second.parent / "run_config.toml")
        assert config.hp is not None and config.hp.nu == 2.0
        assert config.solver is not None
        assert config.solver.network.depth == 1
        assert config.solver.max_iters == 0
        assert config.paths["input"] == str(image_path)

    def test_config_of_other_command(self, tmp_path: Path, disk_files: tuple[Path, Path]):
        """Test a config saved by another command is rejected."""
        image_path, _ = disk_files
        config_path = tmp_path / "train.toml"
        _ = config_path.write_text('command = "train"\n')
        result = invoke("segment", "--config", config_path, "--input", image_path, "--out", tmp_path / "m.png")
        assert result.exit_code == 2

    def test_missing_input_file(self, tmp_path: Path):
        """Test an unreadable input exits with code 2."""
        result = invoke("segment", "--input", tmp_path / "absent.png", "--out", tmp_path / "m.png", "--iters", "0", *TINY)
        assert result.exit_code == 2

    def test_missing_input_option(self, tmp_path: Path):
        """Test --input is required without a config file."""
        result = invoke("segment", "--out", tmp_path / "m.png")
        assert result.exit_code == 2
        assert "--input" in result.output

    def test_negative_iterations(self, tmp_path: Path, disk_files: tuple[Path, Path]):
        """Test --iters must be nonnegative."""
        image_path, _ = disk_files
        result = invoke("segment", "--input", image_path, "--out", tmp_path / "m.png", "--iters", "-1")
        assert result.exit_code == 2

    def test_indivisible_size(self, tmp_path: Path):
        """Test an image that does not fit the network exits with code 2."""
        path = tmp_path / "odd.png"
        save_image(Image(data=np.full((18, 18), 0.5)), path)
        result = invoke("segment", "--input", path, "--out", tmp_path / "m.png", "--iters", "0", "--depth", "2", "--base-channels", "4")
        assert result.exit_code == 2


class TestSegmentMulti:
    """Tests for the segment-multi command."""

    @pytest.fixture
    def stripe_files(self, tmp_path: Path, stripes: tuple[Image, LabelMask]) -> tuple[Path, Path]:
        image, truth = stripes
        save_image(image, tmp_path / "stripes.png")
        save_mask(truth, tmp_path / "stripes_truth.png")
        return tmp_path / "stripes.png", tmp_path / "stripes_truth.png"

    def test_three_phases(self, tmp_path: Path, stripe_files: tuple[Path, Path]):
        """Test an Otsu-initialized run writes a multi-label mask with its sidecar."""
        image_path, truth_path = stripe_files
        out = tmp_path / "out" / "labels.png"
        result = invoke(
            "segment-multi", "--input", image_path, "--out", out, "--phases", "3",
            "--iters", "0", "--init", "otsu", "--truth", truth_path, "--match", "hungarian", *TINY,
        )
        assert result.exit_code == 0, result.output
        assert (out.parent / "labels.labels.txt").exists()
        mask = load_mask(out)
        assert mask.n_labels == 3
        assert matched_multiphase_miou(mask, load_mask(truth_path), 3) >= 0.99
        config = load_run_config(out.parent / "run_config.toml")
        assert config.options["phases"] == 3
        assert config.hp is not None and config.hp.n_phases == 3

    def test_phases_from_config(self, tmp_path: Path, stripe_files: tuple[Path, Path]):
        """Test --phases may come from a saved config."""
        image_path, _ = stripe_files
        first = tmp_path / "a" / "labels.png"
        assert invoke("segment-multi", "--input", image_path, "--out", first, "--phases", "3", "--iters", "0", *TINY).exit_code == 0
        second = tmp_path / "b" / "labels.png"
        result = invoke("segment-multi", "--config", first.parent / "run_config.toml", "--out", second)
        assert result.exit_code == 0, result.output
        assert load_mask(second).n_labels == 3

    @pytest.mark.parametrize("phases", [[], ["--phases", "1"]])
    def test_invalid_phases(self, tmp_path: Path, stripe_files: tuple[Path, Path], phases: list[str]):
        """Test N must be given and at least 2."""
        image_path, _ = stripe_files
        result = invoke("segment-multi", "--input", image_path, "--out", tmp_path / "m.png", *phases)
        assert result.exit_code == 2


class TestInfer:
    """Tests for the infer command."""

    @pytest.fixture
    def checkpoint(self, tmp_path: Path, tiny_spec: NetworkSpec) -> Path:
        directory = tmp_path / "ckpt"
        _ = save_checkpoint(Segmenter(tiny_spec, seed=0), directory, "best_segmenter", tiny_spec, metadata={"image_size": 16})
        return directory

    def test_writes_masks(self, tmp_path: Path, checkpoint: Path, disk_files: tuple[Path, Path]):
        """Test one mask per input image at the training size."""
        images_dir = disk_files[0].parent
        out = tmp_path / "pred"
        result = invoke("infer", "--checkpoint", checkpoint, "--images", images_dir, "--out", out)
        assert result.exit_code == 0, result.output
        assert sorted(p.name for p in out.glob("*.png")) == ["disk.png", "disk_truth.png"]
        assert load_mask(out / "disk.png").shape == (16, 16)
        assert (out / "run_config.toml").exists()

    def test_unreadable_image(self, tmp_path: Path, checkpoint: Path, disk_files: tuple[Path, Path]):
        """Test a broken file is a per-item failure with exit code 1."""
        images_dir = disk_files[0].parent
        _ = (images_dir / "broken.png").write_text("not an image")
        out = tmp_path / "pred"
        result = invoke("infer", "--checkpoint", checkpoint, "--images", images_dir, "--out", out)
        assert result.exit_code == 1
        assert (out / "disk.png").exists()

    def test_too_small_image(self, tmp_path: Path, checkpoint: Path, disk_files: tuple[Path, Path]):
        """Test an image that fails validation is a per-item failure and later images still run."""
        images_dir = tmp_path / "mixed"
        write_gray_png(images_dir / "a_dot.png", [[0.5]])
        save_image(load_image(disk_files[0]), images_dir / "b_disk.png")
        out = tmp_path / "pred"
        result = invoke("infer", "--checkpoint", checkpoint, "--images", images_dir, "--out", out)
        assert result.exit_code == 1
        assert not (out / "a_dot.png").exists()
        assert load_mask(out / "b_disk.png").shape == (16, 16)

    def test_missing_checkpoint(self, tmp_path: Path, disk_files: tuple[Path, Path]):
        """Test a missing checkpoint exits with code 2."""
        result = invoke("infer", "--checkpoint", tmp_path / "none", "--images", disk_files[0].parent, "--out", tmp_path / "pred")
        assert result.exit_code == 2


class TestEval:
    """Tests for the eval command."""

    TRUTH = np.array([[1, 1, 1], [1, 0, 0]], dtype=bool)
    PRED = np.array([[1, 1, 0], [1, 1, 0]], dtype=bool)

    def _write(self, directory: Path, name: str, labels: np.ndarray) -> None:  # pyright: ignore[reportMissingTypeArgument]
        save_mask(LabelMask.from_bool(labels), directory / name)

    def test_scores(self, tmp_path: Path):
        """Test per-image rows and the unweighted summary."""
        self._write(tmp_path / "truth", "a.png", self.TRUTH)
        self._write(tmp_path / "truth", "b.png", self.TRUTH)
        self._write(tmp_path / "pred", "a.png", self.PRED)
        self._write(tmp_path / "pred", "b.png", self.TRUTH)
        out = tmp_path / "eval"
        result = invoke("eval", "--pred", tmp_path / "pred", "--truth", tmp_path / "truth", "--out", out, "--workers", "2")
        assert result.exit_code == 0, result.output

        rows = _read_csv(out / "scores.csv")
        assert [r["image"] for r in rows] == ["a", "b"]
        assert float(rows[0]["f"]) == pytest.approx(0.75)
        assert float(rows[0]["miou"]) == pytest.approx(0.6)
        summary = EvalSummary.model_validate(json.loads((out / "summary.json").read_text()))
        assert summary.images == 2
        assert summary.failures == 0
        assert summary.miou == pytest.approx(0.8)
        assert summary.acc == pytest.approx((4 / 6 + 1) / 2)

    def test_failures(self, tmp_path: Path):
        """Test a missing or mismatched prediction is counted and exits with code 1."""
        self._write(tmp_path / "truth", "a.png", self.TRUTH)
        self._write(tmp_path / "truth", "b.png", self.TRUTH)
        self._write(tmp_path / "truth", "c.png", self.TRUTH)
        self._write(tmp_path / "pred", "a.png", self.TRUTH)
        self._write(tmp_path / "pred", "b.png", np.zeros((3, 3), dtype=bool))
        out = tmp_path / "eval"
        result = invoke("eval", "--pred", tmp_path / "pred", "--truth", tmp_path / "truth", "--out", out)
        assert result.exit_code == 1
        summary = EvalSummary.model_validate(json.loads((out / "summary.json").read_text()))
        assert summary.images == 1
        assert summary.failures == 2
        assert summary.miou == pytest.approx(1.0)

    def test_mask_outside_sidecar_range(self, tmp_path: Path):
        """Test a mask whose labels exceed its sidecar count fails alone."""
        self._write(tmp_path / "truth", "a.png", self.TRUTH)
        self._write(tmp_path / "truth", "b.png", self.TRUTH)
        self._write(tmp_path / "pred", "a.png", self.TRUTH)
        write_gray_png(tmp_path / "pred" / "b.png", [[0.0, 0.5, 1.0], [1.0, 0.5, 0.0]])
        _ = sidecar_path(tmp_path / "pred" / "b.png").write_text("n_labels 2\n0 0\n1 128\n2 255\n")
        out = tmp_path / "eval"
        result = invoke("eval", "--pred", tmp_path / "pred", "--truth", tmp_path / "truth", "--out", out)
        assert result.exit_code == 1
        summary = EvalSummary.model_validate(json.loads((out / "summary.json").read_text()))
        assert (summary.images, summary.failures) == (1, 1)
        assert "b.png" in summary.errors[0]

    def test_resize(self, tmp_path: Path):
        """Test --size lets masks of different resolution be compared."""
        big = np.zeros((8, 8), dtype=bool)
        big[:, :4] = True
        small = np.zeros((4, 4), dtype=bool)
        small[:, :2] = True
        self._write(tmp_path / "truth", "a.png", big)
        self._write(tmp_path / "pred", "a.png", small)
        out = tmp_path / "eval"
        result = invoke("eval", "--pred", tmp_path / "pred", "--truth", tmp_path / "truth", "--out", out, "--size", "4")
        assert result.exit_code == 0, result.output
        assert float(_read_csv(out / "scores.csv")[0]["miou"]) == pytest.approx(1.0)

    def test_empty_directories(self, tmp_path: Path):
        """Test empty inputs exit with code 2."""
        (tmp_path / "pred").mkdir()
        (tmp_path / "truth").mkdir()
        result = invoke("eval", "--pred", tmp_path / "pred", "--truth", tmp_path / "truth", "--out", tmp_path / "eval")
        assert result.exit_code == 2


class TestPlotTrace:
    """Tests for the plot-trace command."""

    def test_default_output(self, tmp_path: Path):
        """Test the plot is written next to the CSV."""
        path = tmp_path / "trace.csv"
        write_trace_csv([EnergyBreakdown(kl=2.0, total=2.0), EnergyBreakdown(kl=1.0, total=1.0)], path)
        result = invoke("plot-trace", path)
        assert result.exit_code == 0, result.output
        assert (tmp_path / "trace.png").exists()

    def test_bad_csv(self, tmp_path: Path):
        """Test a CSV without trace columns exits with code 2."""
        path = tmp_path / "other.csv"
        write_rows(path, ["a"], [{"a": 1}])
        assert invoke("plot-trace", path).exit_code == 2


class TestNoiseSweep:
    """Tests for the noise-sweep command."""

    def test_rows(self, tmp_path: Path):
        """Test one row per noise level and method."""
        result = invoke(
            "noise-sweep", "--sigmas", "0,40", "--size", "16", "--iters", "2",
            "--baseline-iters", "2", *TINY, "--out", tmp_path,
        )
        assert result.exit_code == 0, result.output
        rows = _read_csv(tmp_path / "noise_sweep.csv")
        assert len(rows) == 6
        assert {r["method"] for r in rows} == {"deep_cv", "chan_vese", "gaussian_region"}
        assert all(0.0 <= float(r["miou"]) <= 1.0 for r in rows)

    def test_bad_sigmas(self, tmp_path: Path):
        """Test malformed noise levels are a usage error."""
        assert invoke("noise-sweep", "--sigmas", "a,b", "--out", tmp_path).exit_code == 2
        assert invoke("noise-sweep", "--sigmas=-5", "--out", tmp_path).exit_code == 2


def test_merge_flat_replaces_lists():
    """Test a list of objects in the update replaces the whole stored list."""
    flat: FlatConfig = {"hp.nu": 1.0, "hp.priors.0.mean": [10.0], "hp.priors.1.mean": [-10.0]}
    merge_flat(flat, {"hp.priors.0.mean": [1.0], "hp.priors.1.mean": [2.0], "seed": 3})
    assert flat == {"hp.nu": 1.0, "hp.priors.0.mean": [1.0], "hp.priors.1.mean": [2.0], "seed": 3}
