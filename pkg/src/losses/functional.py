"""
Segmentation and classification losses.

Key Features:
- Focal and DICE losses on per-pixel probabilities, single pair or all pairs
- Matched-pair segmentation loss (focal:DICE = 20:1)
- Positive-weighted binary cross-entropy for the mask classifier
"""

from typing import Optional, Sequence, Tuple

import torch
import torch.nn.functional as F

from ..core.config import LossConfig
from ..core.log import get_logger
from ..core.utils import ShapeError

PROB_EPS = 1e-7

logger = get_logger("losses")


def _same_shape(pred: torch.Tensor, gt: torch.Tensor, what: str):
    if pred.shape != gt.shape:
        raise ShapeError(what, "pixels", tuple(gt.shape), tuple(pred.shape))


def _focal_terms(p: torch.Tensor, alpha: float, gamma: float) -> Tuple[torch.Tensor, torch.Tensor]:
    """Per-pixel focal loss for a positive and for a negative label."""
    p = p.clamp(PROB_EPS, 1 - PROB_EPS)
    pos = -alpha * (1 - p) ** gamma * torch.log(p)
    neg = -(1 - alpha) * p**gamma * torch.log(1 - p)
    return pos, neg


def focal_loss(pred: torch.Tensor, gt: torch.Tensor, alpha: float = 0.25, gamma: float = 2.0) -> torch.Tensor:
    """
    Mean focal loss of one probability map against one binary mask.

    Args:
        pred: Probabilities, clamped `1e-7` away from 0 and 1.
        gt: Binary mask of the same shape.
    """
    _same_shape(pred, gt, "focal_loss")
    gt = gt.to(pred.dtype)
    pos, neg = _focal_terms(pred, alpha, gamma)
    return (gt * pos + (1 - gt) * neg).mean()


def dice_loss(pred: torch.Tensor, gt: torch.Tensor, eps: float = 1.0) -> torch.Tensor:
    """`1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps)`."""
    _same_shape(pred, gt, "dice_loss")
    gt = gt.to(pred.dtype)
    return 1 - (2 * (pred * gt).sum() + eps) / (pred.sum() + gt.sum() + eps)


def pairwise_focal(pred: torch.Tensor, gt: torch.Tensor, alpha: float = 0.25, gamma: float = 2.0) -> torch.Tensor:
    """
    Focal loss of every prediction against every ground truth.

    Args:
        pred: `N x P` flattened probabilities.
        gt: `M x P` flattened binary masks.

    Returns:
        torch.Tensor: `N x M`, entry `(i, j)` equal to `focal_loss(pred[i], gt[j])`.
    """
    pos, neg = _focal_terms(pred, alpha, gamma)
    gt = gt.to(pred.dtype)
    return (pos @ gt.T + neg @ (1 - gt).T) / pred.shape[-1]


def pairwise_dice(pred: torch.Tensor, gt: torch.Tensor, eps: float = 1.0) -> torch.Tensor:
    gt = gt.to(pred.dtype)
    numerator = 2 * pred @ gt.T
    denominator = pred.sum(-1)[:, None] + gt.sum(-1)[None, :]
    return 1 - (numerator + eps) / (denominator + eps)


def pair_loss(focal, dice, cfg: Optional[LossConfig] = None):
    cfg = cfg or LossConfig()
    return cfg.focal_weight * focal + cfg.dice_weight * dice


def segmentation_loss(
    pred: torch.Tensor,
    gt: torch.Tensor,
    pairs: Sequence[Tuple[int, int]],
    cfg: Optional[LossConfig] = None,
) -> torch.Tensor:
    """
    Mean of `20 focal + 1 dice` over the matched `(pred_index, gt_index)` pairs.

    Args:
        pred: `N x h x w` mask probabilities.
        gt: `M x h x w` binary ground truth in the same frame.
        pairs: Matched index pairs.

    Returns:
        torch.Tensor: Scalar loss; a zero still attached to the graph when
        there is no pair.
    """
    cfg = cfg or LossConfig()
    if len(pairs) == 0:
        logger.warning("No matched pairs; segmentation loss set to 0")
        return pred.sum() * 0
    if pred.shape[-2:] != gt.shape[-2:]:
        raise ShapeError("segmentation_loss", "pixels", tuple(gt.shape[-2:]), tuple(pred.shape[-2:]))
    losses = [
        pair_loss(
            focal_loss(pred[i], gt[j], cfg.focal_alpha, cfg.focal_gamma),
            dice_loss(pred[i], gt[j], cfg.dice_epsilon),
            cfg,
        )
        for i, j in pairs
    ]
    return torch.stack(losses).mean()


def weighted_bce(logits: torch.Tensor, labels: torch.Tensor, pos_weight: float = 3.0) -> torch.Tensor:
    """Mean of `-w y log s(l) - (1 - y) log(1 - s(l))`, `w = pos_weight`."""
    labels = labels.to(logits.dtype)
    weight = torch.tensor(pos_weight, dtype=logits.dtype, device=logits.device)
    return F.binary_cross_entropy_with_logits(logits, labels, pos_weight=weight)


def total_loss(seg, cls, lambda_cls: float = 1.0):
    return seg + lambda_cls * cls
