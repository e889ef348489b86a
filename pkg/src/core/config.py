"""
Configuration Module
Central defaults (the training recipe's hyperparameter table), typed views and
JSON/dotted-override loading.
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from .utils import ConfigError


# Adapter network shape
ADAPTER_SETTINGS = {
    "num_prompts": 11,  # N
    "points_per_prompt": 3,  # N_p
    "embed_dim": 256,
    "num_heads": 8,
    "attention_dropout": 0.5,
    "ffn_dim": 768,
    "grid_size": [22, 22],
    "semantic_dim": 64,
    "query_init_std": 0.02,
}

# Loss constants
LOSS_SETTINGS = {
    "focal_weight": 20.0,
    "dice_weight": 1.0,
    "focal_gamma": 2.0,
    "focal_alpha": 0.25,
    "dice_epsilon": 1.0,
    "bce_pos_weight": 3.0,
    "classifier_loss_weight": 1.0,  # lambda_cls
}

# Optimisation and schedule
TRAIN_SETTINGS = {
    "epochs": 50,
    "peak_lr": 8e-4,
    "warmup_epochs": 5,
    "weight_decay": 0.01,
    "betas": [0.9, 0.999],
    "grad_clip": 1.0,
    "batch_size": 1,
    "seed": 0,
    "text_prompt": "cables",
    "schedule": "joint",  # joint | staged
    "stage_switch_epoch": 25,
    "max_steps": None,
    "steps_per_epoch": None,  # None: one pass over the training records
    "dataset_root": None,
    "train_split": "train",
    "val_split": "val",
    "run_dir": "runs/latest",
    "validate_every": 1,
    "dtype": "float32",
    "log_every": 10,
}

# Image augmentation: each kind applied with its own probability
AUGMENT_SETTINGS = {
    "enabled": True,
    "p_grayscale": 0.25,
    "p_color_jitter": 0.25,
    "jitter_range": [0.7, 1.3],
    "p_blur": 0.25,
    "blur_sigma": [0.5, 2.0],
    "p_noise": 0.25,
    "noise_sigma": 8.0,  # in 8-bit intensity units
    "p_patch": 0.25,
    "patch_fraction": 0.25,
}

# Frozen backbones
BACKBONE_SETTINGS = {
    "mode": "stub",  # real | stub
    "clipseg_checkpoint": "CIDAS/clipseg-rd64-refined",
    "sam_checkpoint": None,
    "sam_model_type": "vit_l",
    "cache_size": 0,
    "device": "cpu",
    "stub_seed": 0,
    "stub_embedding_size": [64, 64],
    "stub_mask_scale": 4,
    "stub_disk_radius": 2.0,
    "stub_disk_sharpness": 4.0,
}

# Evaluation protocol
EVAL_SETTINGS = {
    "classifier_threshold": 0.5,
    "oracle_objective": "iou",
    "protocol": "instance-matched-iou/union-dice",
}

# Expected trainable-parameter band
PARAMETER_BUDGET = (2_500_000, 4_200_000)

ENV_OVERRIDES = {
    "DLO_SAM_CHECKPOINT": ("backbone", "sam_checkpoint"),
    "DLO_CLIPSEG_CHECKPOINT": ("backbone", "clipseg_checkpoint"),
    "DLO_BACKBONE_MODE": ("backbone", "mode"),
}


@dataclass
class AdapterConfig:
    num_prompts: int = ADAPTER_SETTINGS["num_prompts"]
    points_per_prompt: int = ADAPTER_SETTINGS["points_per_prompt"]
    embed_dim: int = ADAPTER_SETTINGS["embed_dim"]
    num_heads: int = ADAPTER_SETTINGS["num_heads"]
    attention_dropout: float = ADAPTER_SETTINGS["attention_dropout"]
    ffn_dim: int = ADAPTER_SETTINGS["ffn_dim"]
    grid_size: List[int] = field(default_factory=lambda: list(ADAPTER_SETTINGS["grid_size"]))
    semantic_dim: int = ADAPTER_SETTINGS["semantic_dim"]
    query_init_std: float = ADAPTER_SETTINGS["query_init_std"]

    @property
    def num_queries(self) -> int:
        return self.num_prompts * self.points_per_prompt


@dataclass
class LossConfig:
    focal_weight: float = LOSS_SETTINGS["focal_weight"]
    dice_weight: float = LOSS_SETTINGS["dice_weight"]
    focal_gamma: float = LOSS_SETTINGS["focal_gamma"]
    focal_alpha: float = LOSS_SETTINGS["focal_alpha"]
    dice_epsilon: float = LOSS_SETTINGS["dice_epsilon"]
    bce_pos_weight: float = LOSS_SETTINGS["bce_pos_weight"]
    classifier_loss_weight: float = LOSS_SETTINGS["classifier_loss_weight"]


@dataclass
class AugmentConfig:
    enabled: bool = AUGMENT_SETTINGS["enabled"]
    p_grayscale: float = AUGMENT_SETTINGS["p_grayscale"]
    p_color_jitter: float = AUGMENT_SETTINGS["p_color_jitter"]
    jitter_range: List[float] = field(default_factory=lambda: list(AUGMENT_SETTINGS["jitter_range"]))
    p_blur: float = AUGMENT_SETTINGS["p_blur"]
    blur_sigma: List[float] = field(default_factory=lambda: list(AUGMENT_SETTINGS["blur_sigma"]))
    p_noise: float = AUGMENT_SETTINGS["p_noise"]
    noise_sigma: float = AUGMENT_SETTINGS["noise_sigma"]
    p_patch: float = AUGMENT_SETTINGS["p_patch"]
    patch_fraction: float = AUGMENT_SETTINGS["patch_fraction"]

    @classmethod
    def disabled(cls) -> "AugmentConfig":
        return cls(enabled=False, p_grayscale=0.0, p_color_jitter=0.0, p_blur=0.0, p_noise=0.0, p_patch=0.0)


@dataclass
class BackboneConfig:
    mode: str = BACKBONE_SETTINGS["mode"]
    clipseg_checkpoint: Optional[str] = BACKBONE_SETTINGS["clipseg_checkpoint"]
    sam_checkpoint: Optional[str] = BACKBONE_SETTINGS["sam_checkpoint"]
    sam_model_type: str = BACKBONE_SETTINGS["sam_model_type"]
    cache_size: int = BACKBONE_SETTINGS["cache_size"]
    device: str = BACKBONE_SETTINGS["device"]
    stub_seed: int = BACKBONE_SETTINGS["stub_seed"]
    stub_embedding_size: List[int] = field(default_factory=lambda: list(BACKBONE_SETTINGS["stub_embedding_size"]))
    stub_mask_scale: int = BACKBONE_SETTINGS["stub_mask_scale"]
    stub_disk_radius: float = BACKBONE_SETTINGS["stub_disk_radius"]
    stub_disk_sharpness: float = BACKBONE_SETTINGS["stub_disk_sharpness"]


@dataclass
class EvalConfig:
    classifier_threshold: float = EVAL_SETTINGS["classifier_threshold"]
    oracle_objective: str = EVAL_SETTINGS["oracle_objective"]
    protocol: str = EVAL_SETTINGS["protocol"]


@dataclass
class TrainConfig:
    epochs: int = TRAIN_SETTINGS["epochs"]
    peak_lr: float = TRAIN_SETTINGS["peak_lr"]
    warmup_epochs: float = TRAIN_SETTINGS["warmup_epochs"]
    weight_decay: float = TRAIN_SETTINGS["weight_decay"]
    betas: List[float] = field(default_factory=lambda: list(TRAIN_SETTINGS["betas"]))
    grad_clip: Optional[float] = TRAIN_SETTINGS["grad_clip"]
    batch_size: int = TRAIN_SETTINGS["batch_size"]
    seed: int = TRAIN_SETTINGS["seed"]
    text_prompt: str = TRAIN_SETTINGS["text_prompt"]
    schedule: str = TRAIN_SETTINGS["schedule"]
    stage_switch_epoch: int = TRAIN_SETTINGS["stage_switch_epoch"]
    max_steps: Optional[int] = TRAIN_SETTINGS["max_steps"]
    steps_per_epoch: Optional[int] = TRAIN_SETTINGS["steps_per_epoch"]
    dataset_root: Optional[str] = TRAIN_SETTINGS["dataset_root"]
    train_split: str = TRAIN_SETTINGS["train_split"]
    val_split: Optional[str] = TRAIN_SETTINGS["val_split"]
    run_dir: str = TRAIN_SETTINGS["run_dir"]
    validate_every: int = TRAIN_SETTINGS["validate_every"]
    dtype: str = TRAIN_SETTINGS["dtype"]
    log_every: int = TRAIN_SETTINGS["log_every"]
    adapter: AdapterConfig = field(default_factory=AdapterConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self) -> Dict[str, Any]:
        """Sectioned dictionary, the same shape `load_config` reads."""
        flat = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in _SECTIONS}
        out = {"train": json.loads(json.dumps(flat))}
        for name in _SECTIONS:
            out[name] = asdict(getattr(self, name))
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        return _build(_merge(_defaults(), data))


_SECTIONS = {
    "adapter": AdapterConfig,
    "loss": LossConfig,
    "augment": AugmentConfig,
    "backbone": BackboneConfig,
    "eval": EvalConfig,
}


def _defaults() -> Dict[str, Dict[str, Any]]:
    return TrainConfig().to_dict()


def _merge(base: Dict[str, Dict[str, Any]], data: Dict[str, Any]) -> Dict[str, Dict[str, Any]]:
    for section, values in data.items():
        if section not in base:
            raise ConfigError(f"Unknown config section '{section}'")
        if not isinstance(values, dict):
            raise ConfigError(f"Config section '{section}' must be an object")
        for key, value in values.items():
            if key not in base[section]:
                raise ConfigError(f"Unknown config key '{section}.{key}'")
            base[section][key] = value
    return base


def _build(data: Dict[str, Dict[str, Any]]) -> TrainConfig:
    sections = {name: kind(**data[name]) for name, kind in _SECTIONS.items()}
    cfg = TrainConfig(**data["train"], **sections)
    validate_config(cfg)
    return cfg


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_overrides(overrides: Iterable[str]) -> Dict[str, Dict[str, Any]]:
    """
    Turn `section.key=value` strings into a sectioned dictionary.
    A bare `key=value` addresses the `train` section.
    """
    parsed: Dict[str, Dict[str, Any]] = {}
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"Override '{item}' is not of the form key=value")
        key, raw = item.split("=", 1)
        section, _, name = key.strip().rpartition(".")
        section = section or "train"
        parsed.setdefault(section, {})[name] = _parse_value(raw.strip())
    return parsed


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Iterable[str]] = None,
    env: Optional[Dict[str, str]] = None,
    base: Optional[Dict[str, Any]] = None,
) -> TrainConfig:
    """
    Resolve a TrainConfig: defaults, then `base` (e.g. the configuration stored
    in a checkpoint), then the JSON file, then environment variables, then
    dotted-key overrides.

    Raises:
        ConfigError: unreadable file, unknown key or invalid value.
    """
    data = _defaults()
    if base:
        _merge(data, base)
    if path is not None:
        try:
            file_data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}")
        _merge(data, file_data)

    env = os.environ if env is None else env
    for var, (section, key) in ENV_OVERRIDES.items():
        if env.get(var):
            data[section][key] = env[var]

    _merge(data, parse_overrides(overrides or []))
    try:
        return _build(data)
    except TypeError as e:
        raise ConfigError(f"Invalid configuration: {e}")


def validate_config(cfg: TrainConfig):
    """Check the invariants every run relies on."""
    if cfg.batch_size != 1:
        raise ConfigError("train.batch_size must be 1 (prompts are batched per image)")
    if cfg.epochs <= 0:
        raise ConfigError("train.epochs must be positive")
    if cfg.steps_per_epoch is not None and cfg.steps_per_epoch <= 0:
        raise ConfigError("train.steps_per_epoch must be positive when set")
    if not 0 <= cfg.warmup_epochs < cfg.epochs:
        raise ConfigError("train.warmup_epochs must lie in [0, epochs)")
    if cfg.schedule not in ("joint", "staged"):
        raise ConfigError(f"train.schedule must be 'joint' or 'staged', got '{cfg.schedule}'")
    if cfg.dtype not in ("float32", "float64"):
        raise ConfigError(f"train.dtype must be float32 or float64, got '{cfg.dtype}'")
    if cfg.adapter.embed_dim % cfg.adapter.num_heads != 0:
        raise ConfigError("adapter.embed_dim must be divisible by adapter.num_heads")
    if cfg.adapter.embed_dim % 2 != 0:
        raise ConfigError("adapter.embed_dim must be even (sin/cos pairs)")
    for name in ("focal_weight", "dice_weight", "focal_gamma", "focal_alpha", "dice_epsilon", "bce_pos_weight"):
        if getattr(cfg.loss, name) <= 0:
            raise ConfigError(f"loss.{name} must be positive")
    if cfg.loss.classifier_loss_weight < 0:
        raise ConfigError("loss.classifier_loss_weight must be non-negative")
    if not 0 < cfg.eval.classifier_threshold < 1:
        raise ConfigError("eval.classifier_threshold must lie in (0, 1)")
    if cfg.eval.oracle_objective not in ("iou", "loss"):
        raise ConfigError("eval.oracle_objective must be 'iou' or 'loss'")
    if cfg.backbone.mode not in ("real", "stub"):
        raise ConfigError(f"backbone.mode must be 'real' or 'stub', got '{cfg.backbone.mode}'")


def config_fingerprint(data: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of `data`."""
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
