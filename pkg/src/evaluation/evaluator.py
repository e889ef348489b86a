"""
Per-image and per-split evaluation in classifier mode and Oracle mode.

Key Features:
- Classifier mode keeps the masks the classifier accepts
- Oracle mode keeps the masks matched to ground truth (no classifier)
- Classifier accuracy against matching-derived labels
- Split-level aggregation into an `EvalReport` with a settings fingerprint
"""

from typing import Dict, Iterable, List, Optional

import numpy as np
import torch

from ..core.config import EvalConfig, LossConfig, config_fingerprint
from ..core.log import get_logger
from ..core.records import MODES, DatasetManifest, EvalReport, ImageScore, InstanceRecord, MaskBundle
from ..core.utils import ConfigError, ShapeError
from ..dataset.scanner import iter_records
from ..matching.matcher import cost_matrix, labels_from_matching, oracle_filter, solve_assignment
from .metrics import image_metrics

logger = get_logger("eval")


def kept_indices(
    bundle: MaskBundle,
    gts: np.ndarray,
    mode: str,
    keep_flags: Optional[torch.Tensor] = None,
    objective: str = "iou",
    loss_cfg: Optional[LossConfig] = None,
) -> List[int]:
    if mode == "oracle":
        probs = torch.sigmoid(bundle.upsample())
        return oracle_filter(probs, gts, objective, loss_cfg).indices
    if mode == "classifier":
        if keep_flags is None:
            raise ValueError("Classifier mode needs the classifier keep flags")
        return [i for i, keep in enumerate(keep_flags.tolist()) if keep]
    raise ConfigError(f"Unknown evaluation mode '{mode}', expected one of {MODES}")


def evaluate_image(
    bundle: MaskBundle,
    gts: np.ndarray,
    mode: str,
    keep_flags: Optional[torch.Tensor] = None,
    record_id: str = "",
    objective: str = "iou",
    loss_cfg: Optional[LossConfig] = None,
) -> Optional[ImageScore]:
    """
    Score one image.

    Args:
        bundle: Decoder output for the image.
        gts: `M x H x W` ground-truth submasks.
        mode: "oracle" or "classifier".
        keep_flags: Classifier decisions, classifier mode only.

    Returns:
        ImageScore or None when the image has no ground-truth submask.
    """
    gts = np.asarray(gts, dtype=bool)
    if gts.ndim != 3 or len(gts) == 0:
        logger.warning("Skipping %s: no ground-truth submasks", record_id or "image")
        return None
    if tuple(gts.shape[1:]) != tuple(bundle.source_size):
        raise ShapeError("evaluate_image", "pixels", tuple(bundle.source_size), tuple(gts.shape[1:]))
    indices = kept_indices(bundle, gts, mode, keep_flags, objective, loss_cfg)
    preds = bundle.binary()[indices]
    miou, dice = image_metrics(preds, gts)
    return ImageScore(id=record_id, miou=miou, dice=dice, n_gt=len(gts), n_kept=len(indices))


def matching_labels(bundle: MaskBundle, gts: np.ndarray, loss_cfg: Optional[LossConfig] = None) -> torch.Tensor:
    """Classifier targets: 1 for every mask matched to a ground truth in the decoder frame."""
    target = bundle.to_decoder_frame(gts)
    result = solve_assignment(cost_matrix(bundle.probabilities(), target, loss_cfg))
    return labels_from_matching(result, len(bundle), dtype=bundle.masks.dtype)


def classifier_accuracy(bundle: MaskBundle, gts: np.ndarray, keep_flags: torch.Tensor, loss_cfg: Optional[LossConfig] = None) -> float:
    labels = matching_labels(bundle, gts, loss_cfg).bool()
    return float((keep_flags.cpu() == labels.cpu()).float().mean())


def aggregate(scores: Iterable[ImageScore], mode: str, settings: Optional[Dict] = None) -> EvalReport:
    """Unweighted means as percentages rounded to 2 decimals."""
    scores = list(scores)
    settings = dict(settings or {})
    settings["n_images"] = len(scores)
    if not scores:
        logger.warning("No image was evaluated; aggregate scores are 0")
        miou = dice = 0.0
    else:
        miou = round(100 * float(np.mean([s.miou for s in scores])), 2)
        dice = round(100 * float(np.mean([s.dice for s in scores])), 2)
    fingerprint = config_fingerprint({"mode": mode, **{k: v for k, v in settings.items() if k != "n_images"}})
    return EvalReport(per_image=scores, miou=miou, dice=dice, mode=mode, fingerprint=fingerprint, settings=settings)


def evaluation_settings(eval_cfg: EvalConfig, text: str, backbone_mode: str, objective: Optional[str] = None) -> Dict:
    return {
        "threshold": eval_cfg.classifier_threshold,
        "protocol": eval_cfg.protocol,
        "oracle_objective": objective or eval_cfg.oracle_objective,
        "text": text,
        "backbone_mode": backbone_mode,
    }


def _mean(values) -> float:
    return float(np.mean(values)) if values else 0.0


def _reference(segmenter, record: InstanceRecord):
    return record.semantic_mask if segmenter.gateway.mode == "stub" else None


def _report_orphans(manifest: DatasetManifest):
    for defect in manifest.defects:
        if defect.kind == "orphan_rgb":
            logger.warning("Skipping %s: no ground-truth submasks", defect.record_id)


def evaluate_split(
    manifest: DatasetManifest,
    segmenter,
    mode: str = "classifier",
    eval_cfg: Optional[EvalConfig] = None,
    loss_cfg: Optional[LossConfig] = None,
    text: Optional[str] = None,
) -> EvalReport:
    """Run the segmenter on every record of a split and aggregate one mode."""
    eval_cfg = eval_cfg or EvalConfig()
    text = text or segmenter.text
    _report_orphans(manifest)
    scores = []
    for record in iter_records(manifest):
        result = segmenter.run(record.image, text, _reference(segmenter, record))
        score = evaluate_image(
            result.bundle,
            record.stacked_submasks(),
            mode,
            result.classifier.keep_flags,
            record.id,
            eval_cfg.oracle_objective,
            loss_cfg,
        )
        if score is not None:
            scores.append(score)
    settings = evaluation_settings(eval_cfg, text, segmenter.gateway.mode)
    settings["split"] = manifest.split
    return aggregate(scores, mode, settings)


def validation_metrics(
    records: Iterable[InstanceRecord],
    segmenter,
    eval_cfg: Optional[EvalConfig] = None,
    loss_cfg: Optional[LossConfig] = None,
) -> Dict[str, float]:
    """Oracle mIoU, classifier mIoU and classifier accuracy (fractions) over `records`."""
    eval_cfg = eval_cfg or EvalConfig()
    oracle, classifier, accuracy = [], [], []
    for record in records:
        result = segmenter.run(record.image, reference_mask=_reference(segmenter, record))
        gts = record.stacked_submasks()
        flags = result.classifier.keep_flags
        for mode, bucket in (("oracle", oracle), ("classifier", classifier)):
            score = evaluate_image(result.bundle, gts, mode, flags, record.id, eval_cfg.oracle_objective, loss_cfg)
            if score is not None:
                bucket.append(score.miou)
        accuracy.append(classifier_accuracy(result.bundle, gts, flags, loss_cfg))
    return {"val_miou_oracle": _mean(oracle), "val_miou": _mean(classifier), "val_cls_acc": _mean(accuracy)}
