"""Records describing datasets laid out in the cables directory contract."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .record_base import RecordBase
from ..utils import Defect

SPLITS = ("train", "val", "test")


@dataclass
class InstanceRecord(RecordBase):
    """One RGB image with its per-DLO binary submasks and the semantic mask."""

    id: str = ""
    image: Optional[np.ndarray] = None  # H x W x 3, uint8
    submasks: List[np.ndarray] = field(default_factory=list)  # H x W, bool
    semantic_mask: Optional[np.ndarray] = None  # H x W, bool

    @property
    def size(self):
        return tuple(self.image.shape[:2])

    def stacked_submasks(self) -> np.ndarray:
        """Submasks as one `(M, H, W)` boolean array."""
        if not self.submasks:
            return np.zeros((0, *self.size), dtype=bool)
        return np.stack(self.submasks, axis=0)

    def union(self) -> np.ndarray:
        return self.stacked_submasks().any(axis=0)


@dataclass
class ManifestEntry(RecordBase):
    """Paths of one record inside a split."""

    id: str = ""
    rgb_path: Optional[Path] = None
    mask_dir: Optional[Path] = None
    semantic_path: Optional[Path] = None
    n_submasks: int = 0


@dataclass
class DatasetManifest(RecordBase):
    """Every record id of one split, with the defects found while scanning."""

    root: Optional[Path] = None
    split: str = "train"
    entries: List[ManifestEntry] = field(default_factory=list)
    defects: List[Defect] = field(default_factory=list)

    @property
    def ids(self) -> List[str]:
        return [e.id for e in self.entries]

    def entry(self, record_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.id == record_id:
                return e
        raise KeyError(f"{record_id} is not part of split '{self.split}'")

    def __len__(self):
        return len(self.entries)


@dataclass
class PaddedTargets(RecordBase):
    """Ground-truth submasks padded with empty slots up to the prompt capacity."""

    masks: Optional[np.ndarray] = None  # N x H x W, bool
    valid: Optional[np.ndarray] = None  # N, bool

    @property
    def n_valid(self) -> int:
        return int(self.valid.sum())

    def valid_masks(self) -> np.ndarray:
        return self.masks[self.valid]
