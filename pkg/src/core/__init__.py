# src/core/__init__.py
"""Core public API: re-export records, errors and configuration helpers."""

# --- Records ---
from .records import *

# --- Errors / defects ---
from .utils import (
    Defect,
    DefectKind,
    AdapterError,
    ConfigError,
    BackboneUnavailableError,
    CheckpointMismatchError,
    RasterIOError,
    RecordError,
    ShapeError,
    CapacityError,
    NonFiniteLossError,
    check_axis,
)

# --- Configuration ---
from .config import (
    AdapterConfig,
    LossConfig,
    AugmentConfig,
    BackboneConfig,
    EvalConfig,
    TrainConfig,
    load_config,
    config_fingerprint,
)

from .log import get_logger
