"""Fit a record's submask set to the fixed prompt capacity N."""

import numpy as np

from ..core.log import get_logger
from ..core.records import InstanceRecord, PaddedTargets
from ..core.utils import CapacityError

logger = get_logger("dataset")


def pad_to_capacity(record: InstanceRecord, N: int) -> PaddedTargets:
    """
    Return exactly N ground-truth slots: the real submasks first (verbatim,
    flagged valid) followed by all-zero padding slots (flagged invalid).

    Raises:
        CapacityError: the record has no submasks, or more than N of them
            (use `truncate_to_capacity` first).
    """
    m = len(record.submasks)
    if m == 0:
        raise CapacityError(f"Record {record.id} has no submasks")
    if m > N:
        raise CapacityError(
            f"Record {record.id} has {m} submasks for {N} prompts; "
            "call truncate_to_capacity() to keep the largest ones"
        )
    masks = np.zeros((N, *record.size), dtype=bool)
    masks[:m] = record.stacked_submasks()
    valid = np.zeros(N, dtype=bool)
    valid[:m] = True
    return PaddedTargets(masks=masks, valid=valid)


def truncate_to_capacity(record: InstanceRecord, N: int) -> InstanceRecord:
    """Keep the N largest-area submasks (original order preserved) and warn."""
    m = len(record.submasks)
    if m <= N:
        return record
    areas = np.array([s.sum() for s in record.submasks])
    keep = sorted(np.argsort(-areas, kind="stable")[:N].tolist())
    logger.warning("Record %s: %d submasks truncated to the %d largest", record.id, m, N)
    submasks = [record.submasks[i] for i in keep]
    return InstanceRecord(
        id=record.id,
        image=record.image,
        submasks=submasks,
        semantic_mask=np.stack(submasks).any(axis=0),
    )
