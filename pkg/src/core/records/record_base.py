"""
This module defines the foundational class for the record types exchanged
between the toolkit's stages (dataset, backbones, adapter, evaluation).

The module provides:
- RecordBase: Base dataclass with dictionary serialization
- Conversion helpers turning tensors and arrays into JSON-friendly summaries

Large rasters and tensors are summarized by shape and dtype rather than
dumped, so `to_dict()` output stays readable in manifests and debug reports.
"""

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict

import numpy as np
import torch


@dataclass
class RecordBase:
    """
    Base class for all records.
    It functions as a general class from which the other records inherit.
    """

    def to_dict(self) -> Dict[str, Any]:
        """
        Convert the record and its children to a dictionary representation.
        """
        dictionary = {"_type": self.__class__.__name__}
        for f in fields(self):
            dictionary[f.name] = _convert(getattr(self, f.name))
        return dictionary


def _convert(value):
    if isinstance(value, RecordBase) or callable(getattr(value, "to_dict", None)):
        return value.to_dict()
    if isinstance(value, torch.Tensor):
        if value.numel() == 1:
            return value.item()
        return {"tensor": list(value.shape), "dtype": str(value.dtype)}
    if isinstance(value, np.ndarray):
        if value.size == 1:
            return value.item()
        return {"array": list(value.shape), "dtype": str(value.dtype)}
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_convert(x) for x in value]
    if isinstance(value, dict):
        return {k: _convert(v) for k, v in value.items()}
    return value  # str, int, float, bool, None
