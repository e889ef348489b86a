"""The complete adapter: prompt encoder plus mask classifier."""

from typing import Dict, Union

import torch
import torch.nn as nn

from ..core.config import AdapterConfig
from ..core.records import ClassifierOutput, FrequencyMatrix, MaskBundle, PromptSet, SemanticGrid
from .classifier import MaskClassifier
from .positional import build_grid
from .prompt_encoder import PromptEncoder


class DLOAdapter(nn.Module):
    """
    Both trainable networks. The positional encoding and category embeddings
    are derived from the decoder (`freq`, `label_embeds`) and never trained.
    """

    def __init__(self, cfg: AdapterConfig, freq: FrequencyMatrix, label_embeds: torch.Tensor):
        super().__init__()
        self.cfg = cfg
        h, w = cfg.grid_size
        dpe = build_grid(h, w, freq)
        self.prompt_encoder = PromptEncoder(cfg, dpe.flat(), label_embeds.to(dpe.grid.dtype))
        self.classifier = MaskClassifier(cfg)

    @classmethod
    def for_gateway(cls, cfg: AdapterConfig, gateway) -> "DLOAdapter":
        """Adapter sharing the frequency matrix and category embeddings of `gateway`."""
        freq = gateway.frequency_matrix()
        model = cls(cfg, freq, gateway.label_embeddings())
        return model.to(dtype=gateway.dtype, device=gateway.device)

    def hyperparameters(self) -> Dict[str, object]:
        return {
            "num_prompts": self.cfg.num_prompts,
            "points_per_prompt": self.cfg.points_per_prompt,
            "embed_dim": self.cfg.embed_dim,
            "num_heads": self.cfg.num_heads,
            "ffn_dim": self.cfg.ffn_dim,
            "grid_size": list(self.cfg.grid_size),
            "semantic_dim": self.cfg.semantic_dim,
        }

    def encode(self, grid: Union[SemanticGrid, torch.Tensor]) -> PromptSet:
        return self.prompt_encoder.encode(grid)

    def classify(self, prompts: PromptSet, bundle: MaskBundle, threshold: float = 0.5) -> ClassifierOutput:
        return self.classifier(prompts, bundle.mask_tokens, threshold)


def count_parameters(module: nn.Module) -> int:
    """Number of trainable parameters."""
    return sum(p.numel() for p in module.parameters() if p.requires_grad)
