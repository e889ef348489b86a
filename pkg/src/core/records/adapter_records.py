"""Records produced by the adapter networks and the matching stage."""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import torch

from .record_base import RecordBase
from .backbone_records import FrequencyMatrix

# category order of the label head and of the label embeddings
FOREGROUND = 0
BACKGROUND = 1
NO_POINT = 2


@dataclass
class DPEGrid(RecordBase):
    """Dense positional encoding of the patch grid, `(h, w, d)`."""

    grid: Optional[torch.Tensor] = None
    freq: Optional[FrequencyMatrix] = None

    @property
    def size(self) -> Tuple[int, int]:
        return tuple(self.grid.shape[:2])

    def flat(self) -> torch.Tensor:
        return self.grid.reshape(-1, self.grid.shape[-1])


@dataclass
class PromptSet(RecordBase):
    """N batches of N_p point tokens, before and after label-embedding addition."""

    tokens: Optional[torch.Tensor] = None  # N x N_p x d
    category_logits: Optional[torch.Tensor] = None  # N x N_p x 3
    final_tokens: Optional[torch.Tensor] = None  # N x N_p x d

    @property
    def N(self) -> int:
        return int(self.tokens.shape[0])

    @property
    def N_p(self) -> int:
        return int(self.tokens.shape[1])

    def category_probabilities(self) -> torch.Tensor:
        return torch.softmax(self.category_logits, dim=-1)

    def detach(self) -> "PromptSet":
        return PromptSet(
            tokens=self.tokens.detach(),
            category_logits=self.category_logits.detach(),
            final_tokens=self.final_tokens.detach(),
        )


@dataclass
class ClassifierOutput(RecordBase):
    """Keep/discard decision for each of the N masks."""

    logits: Optional[torch.Tensor] = None
    probabilities: Optional[torch.Tensor] = None
    keep_flags: Optional[torch.Tensor] = None
    threshold: float = 0.5


@dataclass
class MatchResult(RecordBase):
    """Injective assignment between predicted masks and ground-truth submasks."""

    pairs: List[Tuple[int, int]] = field(default_factory=list)
    pair_costs: List[float] = field(default_factory=list)
    unmatched_preds: List[int] = field(default_factory=list)
    unmatched_gts: List[int] = field(default_factory=list)

    @property
    def total_cost(self) -> float:
        return float(sum(self.pair_costs))

    @property
    def pred_indices(self) -> List[int]:
        return [p for p, _ in self.pairs]

    @property
    def gt_indices(self) -> List[int]:
        return [g for _, g in self.pairs]


@dataclass
class KeptMasks(RecordBase):
    """
    Masks that survive filtering, in original order, with their indices.
    `gt_indices` is filled by the Oracle filter only.
    """

    indices: List[int] = field(default_factory=list)
    masks: Optional[torch.Tensor] = None
    gt_indices: Optional[List[int]] = None

    def __len__(self):
        return len(self.indices)
