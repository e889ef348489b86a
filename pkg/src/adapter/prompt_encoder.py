"""
Prompt encoder: semantic grid -> N batches of N_p decoder-ready point tokens.

Pipeline (22x22x64 -> 484x256 -> 33x256 -> 11x3x256):
    upscale MLP -> patch self-attention with DPE -> filter MLP
    -> learned queries sample the DPE -> 3-way point categories
    -> category embeddings mixed in by their softmax weights
"""

from typing import Optional, Union

import torch
import torch.nn as nn

from ..core.config import AdapterConfig
from ..core.records import PromptSet, SemanticGrid
from ..core.utils import ShapeError, check_axis
from .layers import AttentionBlock, mlp


class PromptEncoder(nn.Module):
    """
    The trainable prompt network.

    `dpe` (`h w x d`) and `label_embeds` (`3 x d`, foreground/background/no-point)
    come from the decoder and are kept as non-trainable buffers.
    """

    def __init__(self, cfg: AdapterConfig, dpe: torch.Tensor, label_embeds: torch.Tensor):
        super().__init__()
        self.cfg = cfg
        d = cfg.embed_dim
        h, w = cfg.grid_size
        check_axis("dpe", "cells", h * w, dpe.shape[0])
        check_axis("dpe", "d", d, dpe.shape[-1])
        check_axis("label_embeds", "categories", 3, label_embeds.shape[0])

        self.upscale_mlp = mlp(cfg.semantic_dim, d, d, nn.GELU)
        self.patch_attention = AttentionBlock(d, cfg.num_heads, cfg.attention_dropout, cfg.ffn_dim, nn.GELU)
        self.filter_mlp = mlp(d, d, d, nn.GELU)
        self.queries = nn.Parameter(torch.randn(cfg.num_queries, d) * cfg.query_init_std)
        self.sampler = AttentionBlock(d, cfg.num_heads, cfg.attention_dropout, cfg.ffn_dim, nn.GELU)
        self.label_head = nn.Linear(d, 3)
        self.register_buffer("dpe", dpe.detach().clone(), persistent=False)
        self.register_buffer("label_embeds", label_embeds.detach().clone(), persistent=False)

    def upscale(self, grid: Union[SemanticGrid, torch.Tensor]) -> torch.Tensor:
        """`h x w x c` grid -> row-major `(h w) x d` tokens."""
        grid = grid.grid if isinstance(grid, SemanticGrid) else grid
        if grid.dim() != 3:
            raise ShapeError("upscale", "grid", 3, grid.dim())
        h, w = self.cfg.grid_size
        check_axis("upscale", "h", h, grid.shape[0])
        check_axis("upscale", "w", w, grid.shape[1])
        check_axis("upscale", "c", self.cfg.semantic_dim, grid.shape[2])
        return self.upscale_mlp(grid.reshape(h * w, -1))

    def self_attend_patches(self, tokens: torch.Tensor, dpe: Optional[torch.Tensor] = None) -> torch.Tensor:
        """Q = K = tokens + dpe, V = tokens; residual, norm; dpe added again to the output."""
        dpe = self.dpe if dpe is None else dpe
        check_axis("self_attend_patches", "cells", dpe.shape[0], tokens.shape[0])
        x = tokens.unsqueeze(0)
        pe = dpe.unsqueeze(0)
        out = self.patch_attention(x + pe, x + pe, x, residual=x)
        return (out + pe).squeeze(0)

    def filter_patches(self, tokens: torch.Tensor) -> torch.Tensor:
        return self.filter_mlp(tokens)

    def sample_points(
        self,
        filtered: torch.Tensor,
        dpe: Optional[torch.Tensor] = None,
        logit_bias: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """Learned queries attend over K = filtered + dpe with V = dpe; queries added back, then norm."""
        dpe = self.dpe if dpe is None else dpe
        q = self.queries.unsqueeze(0)
        pe = dpe.unsqueeze(0)
        out = self.sampler(q, filtered.unsqueeze(0) + pe, pe, residual=q, logit_bias=logit_bias)
        return out.squeeze(0)

    def label_points(self, sampled: torch.Tensor, label_embeds: Optional[torch.Tensor] = None) -> PromptSet:
        """Category logits and the softmax mixture of category embeddings, grouped per prompt batch."""
        label_embeds = self.label_embeds if label_embeds is None else label_embeds
        logits = self.label_head(sampled)
        final = sampled + torch.softmax(logits, dim=-1) @ label_embeds
        n, n_p, d = self.cfg.num_prompts, self.cfg.points_per_prompt, self.cfg.embed_dim
        return PromptSet(
            tokens=sampled.reshape(n, n_p, d),
            category_logits=logits.reshape(n, n_p, 3),
            final_tokens=final.reshape(n, n_p, d),
        )

    def encode(self, grid: Union[SemanticGrid, torch.Tensor]) -> PromptSet:
        tokens = self.upscale(grid)
        tokens = self.self_attend_patches(tokens)
        tokens = self.filter_patches(tokens)
        return self.label_points(self.sample_points(tokens))

    def forward(self, grid: Union[SemanticGrid, torch.Tensor]) -> PromptSet:
        return self.encode(grid)
