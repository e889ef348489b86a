"""
Shared fixtures: tiny configurations, stub backbones and fixture datasets.
"""

import pytest
import torch

from src.adapter.model import DLOAdapter
from src.backbones.stub import StubGateway
from src.core.config import AdapterConfig, AugmentConfig, BackboneConfig, TrainConfig
from src.dataset.fixtures import fixture_records, generate_fixture_set


def tiny_adapter_config(**overrides) -> AdapterConfig:
    """Tiny dimensions: grid 4x4x8, d=16, N=2, N_p=2, no feed-forward, no dropout."""
    values = dict(
        num_prompts=2,
        points_per_prompt=2,
        embed_dim=16,
        num_heads=2,
        attention_dropout=0.0,
        ffn_dim=0,
        grid_size=[4, 4],
        semantic_dim=8,
    )
    values.update(overrides)
    return AdapterConfig(**values)


def tiny_train_config(run_dir, dataset_root=None, **overrides) -> TrainConfig:
    cfg = TrainConfig(
        epochs=4,
        warmup_epochs=1,
        dtype="float64",
        run_dir=str(run_dir),
        dataset_root=None if dataset_root is None else str(dataset_root),
        log_every=0,
        adapter=tiny_adapter_config(),
        augment=AugmentConfig.disabled(),
        backbone=BackboneConfig(mode="stub"),
    )
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


@pytest.fixture
def tiny_cfg(tmp_path):
    return tiny_train_config(tmp_path / "run")


@pytest.fixture
def tiny_gateway():
    return StubGateway(BackboneConfig(mode="stub"), tiny_adapter_config(), torch.float64)


@pytest.fixture
def tiny_model(tiny_gateway):
    torch.manual_seed(0)
    return DLOAdapter.for_gateway(tiny_gateway.adapter_cfg, tiny_gateway)


@pytest.fixture
def stub_gateway():
    """Full-size stub backbones (22x22x64 grid, d=256, N=11, N_p=3)."""
    return StubGateway(BackboneConfig(mode="stub"), AdapterConfig(), torch.float32)


@pytest.fixture
def records():
    return fixture_records(seed=7, n_images=3, size=(64, 64), n_curves_range=(2, 3))


@pytest.fixture
def dataset_root(tmp_path):
    return generate_fixture_set(tmp_path / "data", seed=7, n_images=3, size=(64, 64), splits=("train", "val"))


@pytest.fixture
def make_cfg(tmp_path):
    """Factory of tiny training configurations writing under `tmp_path`."""

    def factory(run="run", dataset_root=None, **overrides) -> TrainConfig:
        return tiny_train_config(tmp_path / run, dataset_root, **overrides)

    return factory
