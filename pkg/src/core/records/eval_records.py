"""Evaluation records."""

from dataclasses import dataclass, field
from typing import Any, Dict, List

from .record_base import RecordBase

MODES = ("oracle", "classifier")


@dataclass
class ImageScore(RecordBase):
    id: str = ""
    miou: float = 0.0
    dice: float = 0.0
    n_gt: int = 0
    n_kept: int = 0


@dataclass
class EvalReport(RecordBase):
    """Per-image scores and split-level percentages for one evaluation run."""

    per_image: List[ImageScore] = field(default_factory=list)
    miou: float = 0.0  # percent, 2 decimals
    dice: float = 0.0  # percent, 2 decimals
    mode: str = "classifier"
    fingerprint: str = ""
    settings: Dict[str, Any] = field(default_factory=dict)
