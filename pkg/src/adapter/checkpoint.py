"""Adapter checkpoint files: weights plus the hyperparameters they were built with."""

from pathlib import Path
from typing import Any, Dict, Optional, Union

import torch

from ..core.log import get_logger
from ..core.utils import CheckpointMismatchError, ConfigError
from .model import DLOAdapter

FORMAT_VERSION = 1

logger = get_logger("adapter")


def save_adapter(path: Union[str, Path], model: DLOAdapter, metadata: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format_version": FORMAT_VERSION,
            "hyperparameters": model.hyperparameters(),
            "metadata": metadata or {},
            "state_dict": model.state_dict(),
        },
        path,
    )
    return path


def read_checkpoint(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as e:
        raise CheckpointMismatchError(f"Cannot read checkpoint {path}: {e}")
    if not isinstance(payload, dict) or "state_dict" not in payload:
        raise CheckpointMismatchError(f"{path} is not an adapter checkpoint")
    return payload


def load_adapter(path: Union[str, Path], model: DLOAdapter) -> Dict[str, Any]:
    """
    Load weights into `model`, refusing anything built differently.

    Returns:
        dict: The checkpoint metadata.

    Raises:
        ConfigError: the file does not exist.
        CheckpointMismatchError: format version, hyperparameters or tensors disagree.
    """
    payload = read_checkpoint(path)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointMismatchError(f"Checkpoint format {version}, expected {FORMAT_VERSION}")

    expected = model.hyperparameters()
    stored = payload.get("hyperparameters", {})
    diffs = [f"{k}: checkpoint {stored.get(k)} vs config {v}" for k, v in expected.items() if stored.get(k) != v]
    if diffs:
        raise CheckpointMismatchError("Checkpoint hyperparameters differ: " + "; ".join(diffs))

    try:
        model.load_state_dict(payload["state_dict"])
    except RuntimeError as e:
        raise CheckpointMismatchError(f"Checkpoint tensors do not fit the adapter: {e}")
    logger.info("Loaded adapter checkpoint %s", path)
    return payload.get("metadata", {})
