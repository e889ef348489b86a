"""Learning-rate schedule: linear warm-up to the peak, then cosine decay to 0."""

import math

from ..core.config import TrainConfig


def lr_at(epoch: float, cfg: TrainConfig) -> float:
    """
    Learning rate at a (fractional) epoch.

    Args:
        epoch: Position in `[0, cfg.epochs]`, e.g. `epoch + step_in_epoch / steps_per_epoch`.
        cfg: Supplies `peak_lr`, `warmup_epochs` and `epochs`.

    Returns:
        float: `peak * epoch / warmup` during warm-up, then
        `peak * 0.5 * (1 + cos(pi * (epoch - warmup) / (epochs - warmup)))`.
    """
    epoch = min(max(float(epoch), 0.0), float(cfg.epochs))
    warmup = float(cfg.warmup_epochs)
    if warmup > 0 and epoch < warmup:
        return cfg.peak_lr * epoch / warmup
    progress = (epoch - warmup) / (cfg.epochs - warmup)
    return cfg.peak_lr * 0.5 * (1 + math.cos(math.pi * progress))


def step_epoch(epoch: int, position: int, steps_per_epoch: int) -> float:
    """Fractional epoch of the `position`-th step inside `epoch`."""
    return epoch + position / max(steps_per_epoch, 1)
