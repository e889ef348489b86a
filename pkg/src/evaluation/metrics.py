"""
Mask metrics.

mIoU is instance level: kept predictions are matched to ground-truth submasks
with the IoU-optimal assignment, an unmatched submask scores 0. DICE is
semantic level, on the pixel unions of predictions and ground truth.
"""

from typing import Tuple

import numpy as np

from ..core.utils import ShapeError
from ..matching.matcher import pairwise_iou, solve_assignment


def _binary(mask) -> np.ndarray:
    return np.asarray(mask).astype(bool)


def iou(a, b) -> float:
    """`|a & b| / |a | b|`; two empty masks score 1."""
    a, b = _binary(a), _binary(b)
    if a.shape != b.shape:
        raise ShapeError("iou", "pixels", b.shape, a.shape)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def dice_score(a, b) -> float:
    """`2 |a & b| / (|a| + |b|)`; two empty masks score 1."""
    a, b = _binary(a), _binary(b)
    if a.shape != b.shape:
        raise ShapeError("dice_score", "pixels", b.shape, a.shape)
    total = a.sum() + b.sum()
    if total == 0:
        return 1.0
    return float(2 * np.logical_and(a, b).sum() / total)


def matched_miou(preds, gts) -> float:
    """
    Mean over ground-truth submasks of the IoU with their matched prediction.

    Args:
        preds: `K x H x W` kept binary predictions.
        gts: `M x H x W` binary submasks, `M >= 1`.
    """
    preds, gts = _binary(preds), _binary(gts)
    if len(gts) == 0:
        raise ValueError("matched_miou needs at least one ground-truth submask")
    if len(preds) == 0:
        return 0.0
    scores = pairwise_iou(preds, gts)
    result = solve_assignment(-scores)
    per_gt = np.zeros(len(gts))
    for p, g in result.pairs:
        per_gt[g] = scores[p, g]
    return float(per_gt.mean())


def union_dice(preds, gts) -> float:
    preds, gts = _binary(preds), _binary(gts)
    shape = gts.shape[1:] if gts.ndim == 3 else preds.shape[1:]
    p = preds.any(axis=0) if len(preds) else np.zeros(shape, dtype=bool)
    g = gts.any(axis=0) if len(gts) else np.zeros(shape, dtype=bool)
    return dice_score(p, g)


def image_metrics(preds, gts) -> Tuple[float, float]:
    """`(miou, dice)` of kept predictions against the ground truth."""
    return matched_miou(preds, gts), union_dice(preds, gts)
