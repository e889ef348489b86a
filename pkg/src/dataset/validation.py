"""Full-tree dataset validation: scan, load and cross-check every record."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..core.log import get_logger
from ..core.records import SPLITS, RecordBase
from ..core.utils import ConfigError, Defect, RecordError
from .scanner import load_record, scan_dataset

AGREEMENT = 0.99

logger = get_logger("dataset")


@dataclass
class ValidationReport(RecordBase):
    root: Optional[Path] = None
    records: Dict[str, int] = field(default_factory=dict)
    defects: List[Defect] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.defects

    def kinds(self) -> List[str]:
        return [d.kind for d in self.defects]


def _agreement(a: np.ndarray, b: np.ndarray) -> float:
    return float((a == b).mean())


def _coverage(sub: np.ndarray, semantic: np.ndarray) -> float:
    area = sub.sum()
    return float((sub & semantic).sum() / area) if area else 1.0


def validate_dataset(root: Union[str, Path], splits: Optional[Sequence[str]] = None) -> ValidationReport:
    """
    Validate every split present under `root`.

    Raises:
        ConfigError: no split directory exists.
    """
    root = Path(root)
    present = [s for s in (splits or SPLITS) if (root / s).is_dir()]
    if not present:
        raise ConfigError(f"No split directories ({', '.join(SPLITS)}) under {root}")

    report = ValidationReport(root=root)
    for split in present:
        manifest = scan_dataset(root, split)
        report.defects.extend(manifest.defects)
        loaded = 0
        for record_id in manifest.ids:
            try:
                record = load_record(manifest, record_id)
            except RecordError as e:
                report.defects.append(e.to_defect())
                continue
            loaded += 1
            union = record.union()
            if _agreement(union, record.semantic_mask) < AGREEMENT:
                report.defects.append(
                    Defect("Semantic mask disagrees with the union of submasks", record_id, "semantic_mismatch")
                )
                continue
            for k, sub in enumerate(record.submasks):
                if _coverage(sub, record.semantic_mask) < AGREEMENT:
                    report.defects.append(
                        Defect(f"Submask {k} is not contained in the semantic mask", record_id, "semantic_mismatch")
                    )
                    break
        report.records[split] = loaded

    for defect in report.defects:
        logger.warning("%r", defect)
    return report
