"""
Deterministic stand-ins for the frozen backbones.

The stub semantic encoder reads the ground-truth semantic mask (fixtures
only): channel 0 of each patch is the fraction of mask pixels in it, the
other channels a fixed seeded projection of that fraction. The stub image
encoder is a seeded linear map of the pooled image. The stub decoder turns
every point token into an attention over the DPE grid and blends per-cell
soft disks with it; foreground points add, background points subtract,
no-point contributes nothing. It is differentiable end to end.
"""

import math
from typing import Dict, Optional, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from ..adapter.positional import build_grid
from ..core.config import AdapterConfig, BackboneConfig
from ..core.records import (
    BACKGROUND,
    FOREGROUND,
    FrequencyMatrix,
    ImageEmbedding,
    InstanceRecord,
    MaskBundle,
    PromptSet,
    SemanticGrid,
)
from ..core.utils import ConfigError, ShapeError
from .gateway import BackboneGateway

LOGIT_EPS = 1e-6

# generator stream offsets, one per stub tensor
_LABELS, _SEMANTIC, _IMAGE, _TOKENS = 1, 2, 3, 4


def _generator(seed: int, stream: int = 0) -> torch.Generator:
    return torch.Generator().manual_seed(int(seed) * 64 + stream)


def stub_frequency_matrix(seed: int, num_frequencies: int = 128) -> FrequencyMatrix:
    """`2 x num_frequencies` i.i.d. standard normal entries drawn from `seed`."""
    g = torch.Generator().manual_seed(int(seed))
    return FrequencyMatrix(B=torch.randn(2, num_frequencies, generator=g, dtype=torch.float64))


def disk_kernels(h: int, w: int, scale: int, radius: float, sharpness: float) -> torch.Tensor:
    """
    Soft disk of every grid cell on the `(scale h) x (scale w)` mask frame.

    Returns:
        torch.Tensor: `(h w) x (scale h * scale w)`, value 1 at a cell center,
        decreasing with the distance to it (measured in cells).
    """
    py = (torch.arange(h * scale, dtype=torch.float64) + 0.5) / scale
    px = (torch.arange(w * scale, dtype=torch.float64) + 0.5) / scale
    cy = torch.arange(h, dtype=torch.float64) + 0.5
    cx = torch.arange(w, dtype=torch.float64) + 0.5
    dy = py[None, :] - cy[:, None]  # h x H
    dx = px[None, :] - cx[:, None]  # w x W
    dist = torch.sqrt(dy[:, None, :, None] ** 2 + dx[None, :, None, :] ** 2)
    kernel = torch.sigmoid((radius - dist) * sharpness) / torch.sigmoid(torch.tensor(radius * sharpness, dtype=torch.float64))
    return kernel.reshape(h * w, h * scale * w * scale)


class StubGateway(BackboneGateway):
    mode = "stub"

    def __init__(self, backbone_cfg: BackboneConfig, adapter_cfg: AdapterConfig, dtype=torch.float32):
        super().__init__(backbone_cfg, adapter_cfg, dtype)
        seed = backbone_cfg.stub_seed
        d, c = adapter_cfg.embed_dim, adapter_cfg.semantic_dim
        h, w = self.grid_size

        self._freq = stub_frequency_matrix(seed, d // 2).B.to(dtype)
        self._labels = torch.randn(3, d, generator=_generator(seed, _LABELS), dtype=torch.float64).to(dtype)
        self._semantic_proj = torch.randn(c - 1, generator=_generator(seed, _SEMANTIC), dtype=torch.float64).to(dtype)
        self._image_proj = (
            torch.randn(3, d, generator=_generator(seed, _IMAGE), dtype=torch.float64) / math.sqrt(3)
        ).to(dtype)
        self._token_map = (
            torch.randn(d, d, generator=_generator(seed, _TOKENS), dtype=torch.float64) / math.sqrt(d)
        ).to(dtype)
        self._kernels = disk_kernels(
            h, w, backbone_cfg.stub_mask_scale, backbone_cfg.stub_disk_radius, backbone_cfg.stub_disk_sharpness
        ).to(dtype)
        self.dpe = build_grid(h, w, FrequencyMatrix(B=self._freq))

    @property
    def mask_frame(self) -> Tuple[int, int]:
        h, w = self.grid_size
        s = self.backbone_cfg.stub_mask_scale
        return h * s, w * s

    def frequency_matrix(self) -> FrequencyMatrix:
        return FrequencyMatrix(B=self._freq)

    def label_embeddings(self) -> torch.Tensor:
        return self._labels

    def frozen_state(self) -> Dict[str, torch.Tensor]:
        return {
            "freq": self._freq,
            "labels": self._labels,
            "semantic_proj": self._semantic_proj,
            "image_proj": self._image_proj,
            "token_map": self._token_map,
            "kernels": self._kernels,
        }

    def stub_semantic_grid(self, record: InstanceRecord, text: str = "cables") -> SemanticGrid:
        return self.semantic_grid(record.image, text, record.semantic_mask)

    def _semantic_grid(self, image: np.ndarray, text: str, reference_mask: Optional[np.ndarray]) -> SemanticGrid:
        if reference_mask is None:
            raise ConfigError(
                "The stub semantic backbone only works on fixtures: pass the ground-truth semantic mask "
                "(or use backbone.mode=real)"
            )
        reference_mask = np.asarray(reference_mask, dtype=bool)
        if reference_mask.shape != image.shape[:2]:
            raise ShapeError("stub semantic grid", "pixels", image.shape[:2], reference_mask.shape)
        mask = torch.from_numpy(reference_mask.astype(np.float64))[None, None]
        frac = F.adaptive_avg_pool2d(mask, self.grid_size)[0, 0].to(self.dtype)
        grid = torch.cat([frac[..., None], frac[..., None] * self._semantic_proj], dim=-1)
        return SemanticGrid(grid=grid, source_text=text, source_size=tuple(image.shape[:2]))

    def _image_embedding(self, image: np.ndarray) -> ImageEmbedding:
        x = torch.from_numpy(image.astype(np.float64) / 255.0).permute(2, 0, 1)[None]
        pooled = F.adaptive_avg_pool2d(x, tuple(self.backbone_cfg.stub_embedding_size))[0]
        grid = pooled.permute(1, 2, 0).to(self.dtype) @ self._image_proj
        return ImageEmbedding(grid=grid, source_size=tuple(image.shape[:2]))

    def attention(self, tokens: torch.Tensor) -> torch.Tensor:
        """Softmax over the DPE grid of `<token, dpe> / sqrt(d)`, shape `(..., h w)`."""
        dpe = self.dpe.flat().to(tokens)
        return torch.softmax(tokens @ dpe.T / math.sqrt(self.embed_dim), dim=-1)

    def _decode(self, emb: ImageEmbedding, prompts: PromptSet) -> MaskBundle:
        tokens = prompts.tokens
        n = tokens.shape[0]
        a = self.attention(tokens)  # N x N_p x C
        blend = a @ self._kernels.to(tokens)  # N x N_p x HW
        probs = prompts.category_probabilities()
        sign = probs[..., FOREGROUND] - probs[..., BACKGROUND]
        mask = (sign.unsqueeze(-1) * blend).sum(1).clamp(0, 1).reshape(n, *self.mask_frame)

        pooled = (a @ self.dpe.flat().to(tokens)).mean(1)
        return MaskBundle(
            masks=torch.logit(mask, eps=LOGIT_EPS),
            mask_tokens=pooled @ self._token_map.to(tokens),
            quality=mask.flatten(1).mean(1),
            source_size=emb.source_size,
        )
