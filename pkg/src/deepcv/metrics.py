"""Segmentation quality metrics: confusion counts, precision/recall/F, IoU, accuracy, and
permutation-matched multi-phase IoU.

Degenerate denominators follow fixed conventions and are reported as flags:
- F-measure is 0 when the prediction or the truth is empty ("empty_prediction", "empty_truth")
- IoU is 1 when both masks are empty ("empty_union")
"""

from __future__ import annotations

import itertools

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import linear_sum_assignment

from .config import DeepCVConfig
from .exceptions import DimensionMismatchError, InvalidInputError
from .imagecore import LabelMask
from .report_models import ImageScores
from .types import FloatArray, MatchMethod


class ConfusionCounts(BaseModel):
    """Binary confusion counts with label 1 as the positive class."""

    tp: int = Field(..., ge=0, description="True positives")
    fp: int = Field(..., ge=0, description="False positives")
    tn: int = Field(..., ge=0, description="True negatives")
    fn: int = Field(..., ge=0, description="False negatives")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _check_shapes(pred: LabelMask, truth: LabelMask) -> None:
    if pred.shape != truth.shape:
        raise DimensionMismatchError("mask shape", truth.shape, pred.shape)


def confusion(pred: LabelMask, truth: LabelMask) -> ConfusionCounts:
    """Count TP/FP/TN/FN of two binary masks.

    Raises:
        DimensionMismatchError: If the shapes differ
    """
    _check_shapes(pred, truth)
    p = pred.labels == 1
    t = truth.labels == 1
    return ConfusionCounts(
        tp=int(np.sum(p & t)),
        fp=int(np.sum(p & ~t)),
        tn=int(np.sum(~p & ~t)),
        fn=int(np.sum(~p & t)),
    )


def precision(c: ConfusionCounts) -> float:
    return c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0


def recall(c: ConfusionCounts) -> float:
    return c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0


def f_measure(c: ConfusionCounts) -> float:
    """2RP / (R + P), computed as 2tp / (2tp + fp + fn); 0 when either mask is empty."""
    if c.tp + c.fp == 0 or c.tp + c.fn == 0:
        return 0.0
    return 2 * c.tp / (2 * c.tp + c.fp + c.fn)


def miou(c: ConfusionCounts) -> float:
    """tp / (tp + fp + fn); 1 when both masks are empty."""
    union = c.tp + c.fp + c.fn
    return c.tp / union if union else 1.0


def accuracy(c: ConfusionCounts) -> float:
    return (c.tp + c.tn) / c.total if c.total else 1.0


def degenerate_flags(c: ConfusionCounts) -> list[str]:
    """Names of the degenerate-denominator conventions that apply to ``c``."""
    flags: list[str] = []
    if c.tp + c.fp == 0:
        flags.append("empty_prediction")
    if c.tp + c.fn == 0:
        flags.append("empty_truth")
    if c.tp + c.fp + c.fn == 0:
        flags.append("empty_union")
    return flags


# ============================================================================
# Multi-phase matching
# ============================================================================


def iou_matrix(pred: LabelMask, truth: LabelMask, n_labels: int) -> FloatArray:
    """M[i, j] = IoU of predicted label i against true label j (1 if both are empty)."""
    _check_shapes(pred, truth)
    p = pred.labels.reshape(-1)
    t = truth.labels.reshape(-1)
    joint = np.zeros((n_labels, n_labels), dtype=np.int64)
    np.add.at(joint, (p, t), 1)
    pred_sizes = joint.sum(axis=1)
    true_sizes = joint.sum(axis=0)
    union = pred_sizes[:, None] + true_sizes[None, :] - joint
    return np.where(union > 0, joint / np.maximum(union, 1), 1.0)


def best_matching(
    pred: LabelMask, truth: LabelMask, n_labels: int, method: MatchMethod = "exhaustive"
) -> tuple[list[int], float]:
    """Label permutation maximizing the mean per-class IoU.

    Returns:
        Tuple of (assignment where predicted label i maps to true label assignment[i], mean IoU)

    Raises:
        InvalidInputError: If labels exceed ``n_labels`` or exhaustive search is asked for N > 8
    """
    if max(int(pred.labels.max()), int(truth.labels.max())) >= n_labels:
        raise InvalidInputError(f"Mask labels must be < {n_labels}")
    matrix = iou_matrix(pred, truth, n_labels)
    if method == "hungarian":
        rows, cols = linear_sum_assignment(matrix, maximize=True)
        assignment = [0] * n_labels
        for r, c in zip(rows.tolist(), cols.tolist(), strict=True):
            assignment[r] = c
        return assignment, float(matrix[rows, cols].mean())

    if n_labels > DeepCVConfig.MAX_EXHAUSTIVE_PHASES:
        raise InvalidInputError(
            f"Exhaustive matching supports N <= {DeepCVConfig.MAX_EXHAUSTIVE_PHASES}, "
            f"got {n_labels}; use method='hungarian'"
        )
    best: tuple[list[int], float] = (list(range(n_labels)), -1.0)
    index = np.arange(n_labels)
    for perm in itertools.permutations(range(n_labels)):
        score = float(matrix[index, list(perm)].mean())
        if score > best[1]:
            best = (list(perm), score)
    return best


def matched_multiphase_miou(
    pred: LabelMask, truth: LabelMask, n_labels: int, method: MatchMethod = "exhaustive"
) -> float:
    """Maximum over label permutations of the mean per-class IoU."""
    return best_matching(pred, truth, n_labels, method)[1]


# ============================================================================
# Per-image scoring
# ============================================================================


def binary_scores(image: str, pred: LabelMask, truth: LabelMask) -> ImageScores:
    c = confusion(pred, truth)
    return ImageScores(
        image=image,
        acc=accuracy(c),
        f=f_measure(c),
        miou=miou(c),
        precision=precision(c),
        recall=recall(c),
        flags=degenerate_flags(c),
    )


def multiphase_scores(
    image: str, pred: LabelMask, truth: LabelMask, method: MatchMethod = "exhaustive"
) -> ImageScores:
    """Scores after relabeling the prediction with the best permutation.

    ``f``, ``precision`` and ``recall`` are means over the matched classes.
    """
    n_labels = max(pred.n_labels, truth.n_labels)
    assignment, matched = best_matching(pred, truth, n_labels, method)
    relabeled = np.asarray(assignment)[pred.labels]
    per_class = [
        confusion(
            LabelMask.from_bool(relabeled == k), LabelMask.from_bool(truth.labels == k)
        )
        for k in range(n_labels)
    ]
    flags = sorted({f"class_{k}:{flag}" for k, c in enumerate(per_class) for flag in degenerate_flags(c)})
    return ImageScores(
        image=image,
        acc=float(np.mean(relabeled == truth.labels)),
        f=float(np.mean([f_measure(c) for c in per_class])),
        miou=matched,
        precision=float(np.mean([precision(c) for c in per_class])),
        recall=float(np.mean([recall(c) for c in per_class])),
        flags=flags,
    )


def score_masks(
    image: str, pred: LabelMask, truth: LabelMask, method: MatchMethod = "exhaustive"
) -> ImageScores:
    """Binary scores for two binary masks, matched multi-phase scores otherwise."""
    if pred.is_binary and truth.is_binary:
        return binary_scores(image, pred, truth)
    return multiphase_scores(image, pred, truth, method)


def summarize(scores: list[ImageScores]) -> dict[str, float | int]:
    """Unweighted per-image means."""
    if not scores:
        return {"images": 0}
    return {
        "images": len(scores),
        "acc": float(np.mean([s.acc for s in scores])),
        "f": float(np.mean([s.f for s in scores])),
        "miou": float(np.mean([s.miou for s in scores])),
        "precision": float(np.mean([s.precision for s in scores])),
        "recall": float(np.mean([s.recall for s in scores])),
    }
