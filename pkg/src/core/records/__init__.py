"""Record types shared across packages."""

from .record_base import RecordBase
from .dataset_records import SPLITS, InstanceRecord, ManifestEntry, DatasetManifest, PaddedTargets
from .backbone_records import SemanticGrid, ImageEmbedding, FrequencyMatrix, MaskBundle
from .adapter_records import (
    FOREGROUND,
    BACKGROUND,
    NO_POINT,
    DPEGrid,
    PromptSet,
    ClassifierOutput,
    MatchResult,
    KeptMasks,
)
from .eval_records import MODES, ImageScore, EvalReport

__all__ = [
    "RecordBase",
    "SPLITS", "InstanceRecord", "ManifestEntry", "DatasetManifest", "PaddedTargets",
    "SemanticGrid", "ImageEmbedding", "FrequencyMatrix", "MaskBundle",
    "FOREGROUND", "BACKGROUND", "NO_POINT",
    "DPEGrid", "PromptSet", "ClassifierOutput", "MatchResult", "KeptMasks",
    "MODES", "ImageScore", "EvalReport",
]
