"""
Bipartite matching between predicted masks and ground-truth submasks.

Key Features:
- Cost matrix equal to the training segmentation loss (20 focal + 1 DICE)
- Optimal assignment with a deterministic tie-break
- Classifier labels from a matching
- Oracle filtering (ground-truth matching replaces the classifier)
"""

from typing import Literal, Optional, Union

import numpy as np
import torch
from scipy.optimize import linear_sum_assignment

from ..core.config import LossConfig
from ..core.log import get_logger
from ..core.records import KeptMasks, MatchResult
from ..core.utils import ShapeError
from ..losses.functional import pairwise_dice, pairwise_focal

ArrayLike = Union[np.ndarray, torch.Tensor]

logger = get_logger("matching")


def _as_tensor(masks: ArrayLike, like: Optional[torch.Tensor] = None) -> torch.Tensor:
    t = torch.as_tensor(np.asarray(masks) if not isinstance(masks, torch.Tensor) else masks)
    if like is not None:
        t = t.to(dtype=like.dtype, device=like.device)
    return t


@torch.no_grad()
def cost_matrix(pred: torch.Tensor, gt: ArrayLike, cfg: Optional[LossConfig] = None) -> torch.Tensor:
    """
    Matching cost of every prediction against every valid ground truth.

    Args:
        pred: `N x h x w` probabilities.
        gt: `M x h x w` binary submasks (padding removed).

    Returns:
        torch.Tensor: `N x M` matrix `20 focal + 1 dice`.

    Raises:
        ShapeError: the two mask sets are at different resolutions.
    """
    cfg = cfg or LossConfig()
    gt = _as_tensor(gt, like=pred)
    if pred.shape[-2:] != gt.shape[-2:]:
        raise ShapeError("cost_matrix", "pixels", tuple(gt.shape[-2:]), tuple(pred.shape[-2:]))
    p = pred.flatten(1)
    g = gt.flatten(1)
    return (
        cfg.focal_weight * pairwise_focal(p, g, cfg.focal_alpha, cfg.focal_gamma)
        + cfg.dice_weight * pairwise_dice(p, g, cfg.dice_epsilon)
    )


def pairwise_iou(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    """`N x M` IoU of binary masks `a (N x H x W)` and `b (M x H x W)`; empty-empty is 1."""
    a = np.asarray(a.detach().cpu() if isinstance(a, torch.Tensor) else a).astype(bool)
    b = np.asarray(b.detach().cpu() if isinstance(b, torch.Tensor) else b).astype(bool)
    if a.shape[1:] != b.shape[1:]:
        raise ShapeError("pairwise_iou", "pixels", b.shape[1:], a.shape[1:])
    fa = a.reshape(len(a), -1).astype(np.float64)
    fb = b.reshape(len(b), -1).astype(np.float64)
    inter = fa @ fb.T
    union = fa.sum(1)[:, None] + fb.sum(1)[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(union > 0, inter / np.maximum(union, 1), 1.0)
    return out


def _completion(cost: np.ndarray, rows, cols, size: int) -> Optional[float]:
    """Optimal cost of matching `size` pairs within the sub-matrix, None if impossible."""
    if size == 0:
        return 0.0
    if min(len(rows), len(cols)) < size:
        return None
    sub = cost[np.ix_(rows, cols)]
    r, c = linear_sum_assignment(sub)
    return float(sub[r, c].sum())


def solve_assignment(cost: ArrayLike) -> MatchResult:
    """
    Minimal-total-cost injective assignment of size `min(N, M)`.

    Among optimal assignments the one chosen gives each prediction, in index
    order, the lowest ground-truth index still compatible with an optimum
    (leaving it unmatched ranks after every ground truth).
    """
    if isinstance(cost, torch.Tensor):
        cost = cost.detach().cpu().numpy()
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ShapeError("solve_assignment", "matrix", 2, cost.ndim)
    n, m = cost.shape
    if n == 0 or m == 0:
        return MatchResult(unmatched_preds=list(range(n)), unmatched_gts=list(range(m)))
    if not np.isfinite(cost).all():
        raise ValueError("Cost matrix contains non-finite entries")

    k = min(n, m)
    r, c = linear_sum_assignment(cost)
    optimum = float(cost[r, c].sum())
    tol = 1e-9 * max(1.0, abs(optimum))

    pairs, fixed = [], 0.0
    available = list(range(m))
    for i in range(n):
        need = k - len(pairs)
        if need == 0:
            break
        later = list(range(i + 1, n))
        for g in available:
            rest = [x for x in available if x != g]
            completion = _completion(cost, later, rest, need - 1)
            if completion is not None and abs(fixed + cost[i, g] + completion - optimum) <= tol:
                pairs.append((i, g))
                fixed += float(cost[i, g])
                available = rest
                break

    if len(pairs) != k:
        # rounding in the sub-problem optima can reject every candidate of a row
        logger.warning("Tie-break lost optimality on a %dx%d cost matrix; using the solver pairing", n, m)
        pairs = sorted((int(p), int(g)) for p, g in zip(r, c))
        taken = {g for _, g in pairs}
        available = [g for g in range(m) if g not in taken]

    matched_preds = {p for p, _ in pairs}
    return MatchResult(
        pairs=pairs,
        pair_costs=[float(cost[p, g]) for p, g in pairs],
        unmatched_preds=[i for i in range(n) if i not in matched_preds],
        unmatched_gts=available,
    )


def labels_from_matching(result: MatchResult, N: int, dtype=torch.float32) -> torch.Tensor:
    """1 for every matched prediction, 0 otherwise."""
    labels = torch.zeros(N, dtype=dtype)
    for p, _ in result.pairs:
        labels[p] = 1
    return labels


def oracle_filter(
    pred: torch.Tensor,
    gt: ArrayLike,
    objective: Literal["iou", "loss"] = "iou",
    cfg: Optional[LossConfig] = None,
) -> KeptMasks:
    """
    Keep exactly the predictions matched to a ground-truth submask.

    Args:
        pred: `N x H x W` probabilities.
        gt: `M x H x W` binary submasks.
        objective: `"iou"` matches on -IoU of the masks binarized at 0.5,
            `"loss"` on the training cost.

    Returns:
        KeptMasks: matched predictions in index order, with their partners.
    """
    if objective == "iou":
        cost = -pairwise_iou((pred > 0.5).cpu().numpy(), gt)
    elif objective == "loss":
        cost = cost_matrix(pred, gt, cfg)
    else:
        raise ValueError(f"Unknown oracle objective '{objective}'")
    result = solve_assignment(cost)
    pairs = sorted(result.pairs)
    indices = [p for p, _ in pairs]
    return KeptMasks(
        indices=indices,
        masks=pred[indices] if indices else pred[:0],
        gt_indices=[g for _, g in pairs],
    )
