"""
Mask classifier: keeps or discards each of the N decoded masks.

Text-conditioned queries (the pooled prompt batches) cross-attend over the
decoder's mask tokens, then self-attend, then an MLP yields one logit per mask.
"""

from typing import Optional, Union

import torch
import torch.nn as nn

from ..core.config import AdapterConfig
from ..core.records import ClassifierOutput, KeptMasks, MaskBundle, PromptSet
from ..core.utils import ShapeError, check_axis
from .layers import AttentionBlock, mlp


def keep_mask(probabilities: torch.Tensor, threshold: float) -> torch.Tensor:
    """`p >= threshold`; a threshold of 1 keeps nothing, saturated probabilities included."""
    if threshold >= 1:
        return torch.zeros_like(probabilities, dtype=torch.bool)
    return probabilities >= threshold


class MaskClassifier(nn.Module):
    def __init__(self, cfg: AdapterConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.embed_dim
        self.pool_mlp = mlp(cfg.points_per_prompt * d, d, d, nn.ReLU)
        self.cross_attention = AttentionBlock(d, cfg.num_heads, cfg.attention_dropout, cfg.ffn_dim, nn.ReLU)
        self.self_attention = AttentionBlock(d, cfg.num_heads, cfg.attention_dropout, cfg.ffn_dim, nn.ReLU)
        self.head = mlp(d, d, 1, nn.ReLU)

    def pool_prompts(self, prompts: Union[PromptSet, torch.Tensor]) -> torch.Tensor:
        """Concatenate the N_p pre-label tokens of each batch and map them to one query: `N x d`."""
        tokens = prompts.tokens if isinstance(prompts, PromptSet) else prompts
        if tokens.dim() != 3:
            raise ShapeError("pool_prompts", "prompts", 3, tokens.dim())
        check_axis("pool_prompts", "N_p", self.cfg.points_per_prompt, tokens.shape[1])
        check_axis("pool_prompts", "d", self.cfg.embed_dim, tokens.shape[2])
        return self.pool_mlp(tokens.reshape(tokens.shape[0], -1))

    def classify(self, queries: torch.Tensor, mask_tokens: torch.Tensor, threshold: float = 0.5) -> ClassifierOutput:
        check_axis("classify", "N", queries.shape[0], mask_tokens.shape[0])
        check_axis("classify", "d", self.cfg.embed_dim, mask_tokens.shape[-1])
        if queries.shape[0] == 0:
            logits = queries.new_zeros((0,))
        else:
            q = queries.unsqueeze(0)
            m = mask_tokens.unsqueeze(0)
            x = self.cross_attention(q, m, m, residual=q)
            x = self.self_attention(x, x, x)
            logits = self.head(x).reshape(-1)
        probabilities = torch.sigmoid(logits)
        return ClassifierOutput(
            logits=logits,
            probabilities=probabilities,
            keep_flags=keep_mask(probabilities, threshold),
            threshold=threshold,
        )

    def forward(self, prompts: PromptSet, mask_tokens: torch.Tensor, threshold: float = 0.5) -> ClassifierOutput:
        return self.classify(self.pool_prompts(prompts), mask_tokens, threshold)


def select(out: ClassifierOutput, bundle: MaskBundle, threshold: Optional[float] = None) -> KeptMasks:
    """Masks whose keep probability reaches the threshold, in their original order."""
    threshold = out.threshold if threshold is None else threshold
    flags = keep_mask(out.probabilities.detach(), threshold)
    indices = [i for i, keep in enumerate(flags.tolist()) if keep]
    return KeptMasks(indices=indices, masks=bundle.masks[indices] if indices else bundle.masks[:0])
