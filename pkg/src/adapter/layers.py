"""Building blocks shared by the prompt encoder and the mask classifier."""

from typing import Optional, Type

import torch
import torch.nn as nn


def mlp(in_dim: int, hidden_dim: int, out_dim: int, activation: Type[nn.Module] = nn.GELU) -> nn.Sequential:
    """Two-layer per-token MLP."""
    return nn.Sequential(nn.Linear(in_dim, hidden_dim), activation(), nn.Linear(hidden_dim, out_dim))


class AttentionBlock(nn.Module):
    """
    Multi-head attention followed by a residual add and layer normalization,
    then a feed-forward sub-layer with its own residual and normalization.

    Dropout acts on the attention weights only. With `ffn_dim = 0` the block
    is the attention sub-layer alone.

    With `keep_weights` set the per-head attention weights of the last call are kept in
    `last_weights` (`B x heads x L x S`); `last_normalized` always holds the
    output of the first layer norm.
    """

    def __init__(
        self,
        dim: int,
        num_heads: int,
        dropout: float = 0.0,
        ffn_dim: int = 0,
        activation: Type[nn.Module] = nn.GELU,
    ):
        super().__init__()
        self.attention = nn.MultiheadAttention(dim, num_heads, dropout=dropout, batch_first=True)
        self.norm = nn.LayerNorm(dim)
        if ffn_dim > 0:
            self.ffn = mlp(dim, ffn_dim, dim, activation)
            self.ffn_norm = nn.LayerNorm(dim)
        else:
            self.ffn = None
            self.ffn_norm = None
        self.keep_weights = False
        self.last_weights: Optional[torch.Tensor] = None
        self.last_normalized: Optional[torch.Tensor] = None

    def forward(
        self,
        query: torch.Tensor,
        key: torch.Tensor,
        value: torch.Tensor,
        residual: Optional[torch.Tensor] = None,
        logit_bias: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """
        Args:
            query, key, value: `B x L x D`, `B x S x D`, `B x S x D`.
            residual: Tensor added back to the attention output (the query by default).
            logit_bias: Additive `L x S` bias on the attention logits.
        """
        out, weights = self.attention(
            query,
            key,
            value,
            attn_mask=logit_bias,
            need_weights=self.keep_weights,
            average_attn_weights=False,
        )
        self.last_weights = weights
        x = self.norm((query if residual is None else residual) + out)
        self.last_normalized = x
        if self.ffn is not None:
            x = self.ffn_norm(x + self.ffn(x))
        return x
