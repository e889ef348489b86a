"""Resumable training state."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import torch

from ..core.records import RecordBase
from ..core.utils import CheckpointMismatchError, ConfigError


@dataclass
class TrainState(RecordBase):
    """
    Everything needed to continue a run where it stopped.

    `epoch` and `position` point at the next step to run: step `position`
    of the epoch's shuffled order.
    """

    step: int = 0
    epoch: int = 0
    position: int = 0
    best_value: Optional[float] = None
    best_epoch: Optional[int] = None
    adapter: Dict[str, Any] = field(default_factory=dict)
    optimizer: Dict[str, Any] = field(default_factory=dict)
    rng: Optional[torch.Tensor] = None
    fingerprint: str = ""

    def to_dict(self):
        return {
            "step": self.step,
            "epoch": self.epoch,
            "position": self.position,
            "best_value": self.best_value,
            "best_epoch": self.best_epoch,
            "fingerprint": self.fingerprint,
        }


def save_state(path: Union[str, Path], state: TrainState) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = dict(state.to_dict(), adapter=state.adapter, optimizer=state.optimizer, rng=state.rng)
    torch.save(payload, path)
    return path


def load_state(path: Union[str, Path]) -> TrainState:
    """
    Raises:
        ConfigError: the file does not exist.
        CheckpointMismatchError: the file is not a training state.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Training state not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as e:
        raise CheckpointMismatchError(f"Cannot read training state {path}: {e}")
    missing = {"step", "epoch", "adapter", "optimizer"} - set(payload if isinstance(payload, dict) else ())
    if missing:
        raise CheckpointMismatchError(f"{path} is not a training state (missing {sorted(missing)})")
    return TrainState(
        step=payload["step"],
        epoch=payload["epoch"],
        position=payload.get("position", 0),
        best_value=payload.get("best_value"),
        best_epoch=payload.get("best_epoch"),
        adapter=payload["adapter"],
        optimizer=payload["optimizer"],
        rng=payload.get("rng"),
        fingerprint=payload.get("fingerprint", ""),
    )
