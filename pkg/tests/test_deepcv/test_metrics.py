"""Tests for metrics.py"""

import numpy as np
import pytest

from deepcv.exceptions import DimensionMismatchError, InvalidInputError
from deepcv.imagecore import LabelMask
from deepcv.metrics import (
    ConfusionCounts,
    accuracy,
    best_matching,
    confusion,
    f_measure,
    iou_matrix,
    matched_multiphase_miou,
    miou,
    precision,
    recall,
    score_masks,
    summarize,
)
from deepcv.report_models import ImageScores

TRUTH = LabelMask.from_bool(np.array([[1, 1, 1], [1, 0, 0]]))
PRED = LabelMask.from_bool(np.array([[1, 1, 0], [1, 1, 0]]))


class TestBinaryMetrics:
    """Tests for binary scores."""

    def test_confusion(self):
        """Test counts on a 2×3 example."""
        c = confusion(PRED, TRUTH)
        assert (c.tp, c.fp, c.tn, c.fn) == (3, 1, 1, 1)
        assert c.total == 6

    def test_scores(self):
        """Test F, IoU, precision, recall and accuracy."""
        c = confusion(PRED, TRUTH)
        assert f_measure(c) == pytest.approx(0.75)
        assert miou(c) == pytest.approx(0.6)
        assert precision(c) == pytest.approx(0.75)
        assert recall(c) == pytest.approx(0.75)
        assert accuracy(c) == pytest.approx(4 / 6)

    def test_identical_masks(self):
        """Test a perfect prediction scores 1."""
        scores = score_masks("same", TRUTH, TRUTH)
        assert (scores.acc, scores.f, scores.miou) == (1.0, 1.0, 1.0)
        assert scores.flags == []

    def test_empty_masks(self):
        """Test the degenerate conventions when both masks are empty."""
        empty = LabelMask.from_bool(np.zeros((2, 2)))
        scores = score_masks("empty", empty, empty)
        assert scores.miou == 1.0
        assert scores.f == 0.0
        assert scores.acc == 1.0
        assert scores.flags == ["empty_prediction", "empty_truth", "empty_union"]

    def test_empty_prediction(self):
        """Test F is 0 and flagged when nothing is predicted."""
        scores = score_masks("none", LabelMask.from_bool(np.zeros((2, 3))), TRUTH)
        assert scores.f == 0.0
        assert scores.miou == 0.0
        assert scores.flags == ["empty_prediction"]

    def test_f_measure_determines_iou(self):
        """Test F / (2 − F) = IoU over 10,000 random confusion counts with both masks non-empty."""
        rng = np.random.default_rng(0)
        for tp, fp, tn, fn in rng.integers(0, 60, size=(10_000, 4)):
            if tp + fp == 0 or tp + fn == 0:
                continue
            c = ConfusionCounts(tp=int(tp), fp=int(fp), tn=int(tn), fn=int(fn))
            f = f_measure(c)
            assert f / (2 - f) == pytest.approx(miou(c), abs=1e-12)

    def test_shape_mismatch(self):
        """Test masks of different shapes are rejected."""
        with pytest.raises(DimensionMismatchError):
            _ = confusion(PRED, LabelMask.from_bool(np.zeros((3, 2))))


class TestMultiphaseMatching:
    """Tests for permutation-matched IoU."""

    @pytest.fixture
    def shifted(self) -> tuple[LabelMask, LabelMask]:
        truth = np.repeat(np.arange(4), 3).reshape(4, 3)
        return LabelMask(labels=(truth + 1) % 4, n_labels=4), LabelMask(labels=truth, n_labels=4)

    @pytest.mark.parametrize("method", ["exhaustive", "hungarian"])
    def test_relabeling_is_free(self, shifted: tuple[LabelMask, LabelMask], method: str):
        """Test a cyclic relabeling scores 1."""
        pred, truth = shifted
        assignment, score = best_matching(pred, truth, 4, method)  # pyright: ignore[reportArgumentType]
        assert score == pytest.approx(1.0)
        assert assignment == [3, 0, 1, 2]

    def test_iou_matrix(self, shifted: tuple[LabelMask, LabelMask]):
        """Test the pairwise IoU matrix of a relabeling is a permutation matrix."""
        pred, truth = shifted
        matrix = iou_matrix(pred, truth, 4)
        assert np.allclose(matrix.sum(axis=0), 1.0)
        assert matrix[1, 0] == 1.0

    def test_matched_scores(self, shifted: tuple[LabelMask, LabelMask]):
        """Test score_masks relabels multi-phase predictions."""
        pred, truth = shifted
        scores = score_masks("multi", pred, truth)
        assert scores.miou == pytest.approx(1.0)
        assert scores.acc == pytest.approx(1.0)
        assert scores.f == pytest.approx(1.0)

    def test_partial_overlap(self):
        """Test a three-phase example against a hand-computed value."""
        truth = LabelMask(labels=np.array([[0, 0, 1, 1, 2, 2]]), n_labels=3)
        pred = LabelMask(labels=np.array([[2, 2, 0, 0, 0, 1]]), n_labels=3)
        # best map: 2->0, 0->1, 1->2 gives IoUs 1, 2/3, 1/2
        assert matched_multiphase_miou(pred, truth, 3) == pytest.approx((1 + 2 / 3 + 1 / 2) / 3)
        assert matched_multiphase_miou(pred, truth, 3, "hungarian") == pytest.approx(
            (1 + 2 / 3 + 1 / 2) / 3
        )

    def test_exhaustive_limit(self):
        """Test exhaustive search refuses more than eight phases."""
        labels = np.arange(9).reshape(3, 3)
        mask = LabelMask(labels=labels, n_labels=9)
        with pytest.raises(InvalidInputError):
            _ = matched_multiphase_miou(mask, mask, 9)
        assert matched_multiphase_miou(mask, mask, 9, "hungarian") == pytest.approx(1.0)


def test_summarize():
    """Test unweighted per-image means."""
    scores = [
        ImageScores(image="a", acc=1.0, f=1.0, miou=1.0, precision=1.0, recall=1.0),
        ImageScores(image="b", acc=0.5, f=0.0, miou=0.2, precision=0.0, recall=0.0),
    ]
    summary = summarize(scores)
    assert summary["images"] == 2
    assert summary["miou"] == pytest.approx(0.6)
    assert summarize([]) == {"images": 0}
