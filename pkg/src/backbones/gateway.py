"""
Uniform access to the frozen backbones.

Key Features:
- `semantic_grid`: text-conditioned 22x22x64 grid of the semantic encoder
- `image_embedding`: 64x64x256 image embedding, optionally cached by content
- `decode`: one mask, one mask token and one quality value per prompt batch,
  all batches in one forward pass
- Frequency matrix and category embeddings the adapter must share with the decoder
"""

from abc import ABC, abstractmethod
from typing import Dict, Optional, Tuple

import numpy as np
import torch

from ..core.config import AdapterConfig, BackboneConfig
from ..core.log import get_logger
from ..core.records import FrequencyMatrix, ImageEmbedding, MaskBundle, PromptSet, SemanticGrid
from ..core.utils import ConfigError, ShapeError, check_axis
from .cache import EmbeddingCache

logger = get_logger("backbones")


def check_rgb(image: np.ndarray, what: str = "image"):
    """Require an `H x W x 3` uint8 raster."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeError(what, "channels", 3, image.shape[2] if image.ndim == 3 else f"{image.ndim}-d array")
    if image.dtype != np.uint8:
        raise ValueError(f"{what} must be uint8 RGB, got {image.dtype}")
    return image


class BackboneGateway(ABC):
    """Common surface of the real and stub backbones."""

    mode = "abstract"

    def __init__(self, backbone_cfg: BackboneConfig, adapter_cfg: AdapterConfig, dtype=torch.float32):
        self.backbone_cfg = backbone_cfg
        self.adapter_cfg = adapter_cfg
        self.dtype = dtype
        self.device = torch.device(backbone_cfg.device)
        self.cache = EmbeddingCache(backbone_cfg.cache_size)

    @property
    def grid_size(self) -> Tuple[int, int]:
        return tuple(self.adapter_cfg.grid_size)

    @property
    def embed_dim(self) -> int:
        return self.adapter_cfg.embed_dim

    def semantic_grid(self, image: np.ndarray, text: str, reference_mask: Optional[np.ndarray] = None) -> SemanticGrid:
        image = check_rgb(image)
        if not text or not text.strip():
            raise ConfigError("Text prompt must be non-empty")
        grid = self._semantic_grid(image, text, reference_mask)
        h, w = self.grid_size
        check_axis("semantic_grid", "h", h, grid.grid.shape[0])
        check_axis("semantic_grid", "w", w, grid.grid.shape[1])
        check_axis("semantic_grid", "c", self.adapter_cfg.semantic_dim, grid.grid.shape[2])
        return grid

    def image_embedding(self, image: np.ndarray) -> ImageEmbedding:
        image = check_rgb(image)
        return self.cache.get_or_compute(image, self._image_embedding)

    def decode(self, emb: ImageEmbedding, prompts: PromptSet) -> MaskBundle:
        """
        Decode N prompt batches in a single pass.

        Raises:
            ShapeError: the token width differs from the decoder width.
        """
        final = prompts.final_tokens
        if final.dim() != 3:
            raise ShapeError("decode", "prompts", 3, final.dim())
        check_axis("decode", "d", self.embed_dim, final.shape[-1])
        check_axis("decode", "N_p", prompts.tokens.shape[1], final.shape[1])
        if final.shape[0] == 0:
            return self._empty_bundle(emb, final)
        return self._decode(emb, prompts)

    def _empty_bundle(self, emb: ImageEmbedding, like: torch.Tensor) -> MaskBundle:
        h, w = self.mask_frame
        return MaskBundle(
            masks=like.new_zeros((0, h, w)),
            mask_tokens=like.new_zeros((0, self.embed_dim)),
            quality=like.new_zeros((0,)),
            source_size=emb.source_size,
        )

    @property
    @abstractmethod
    def mask_frame(self) -> Tuple[int, int]:
        """Low-resolution mask size."""

    @abstractmethod
    def frequency_matrix(self) -> FrequencyMatrix:
        ...

    @abstractmethod
    def label_embeddings(self) -> torch.Tensor:
        """`3 x d` embeddings in foreground, background, no-point order."""

    @abstractmethod
    def frozen_state(self) -> Dict[str, torch.Tensor]:
        """Every backbone tensor; training must leave them bit-identical."""

    @abstractmethod
    def _semantic_grid(self, image: np.ndarray, text: str, reference_mask: Optional[np.ndarray]) -> SemanticGrid:
        ...

    @abstractmethod
    def _image_embedding(self, image: np.ndarray) -> ImageEmbedding:
        ...

    @abstractmethod
    def _decode(self, emb: ImageEmbedding, prompts: PromptSet) -> MaskBundle:
        ...


def build_gateway(
    backbone_cfg: BackboneConfig,
    adapter_cfg: Optional[AdapterConfig] = None,
    dtype=torch.float32,
) -> BackboneGateway:
    """Instantiate the gateway named by `backbone_cfg.mode`."""
    adapter_cfg = adapter_cfg or AdapterConfig()
    if backbone_cfg.mode == "stub":
        from .stub import StubGateway

        return StubGateway(backbone_cfg, adapter_cfg, dtype)
    if backbone_cfg.mode == "real":
        from .real import RealGateway

        return RealGateway(backbone_cfg, adapter_cfg, dtype)
    raise ConfigError(f"Unknown backbone mode '{backbone_cfg.mode}'")
