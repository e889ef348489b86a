"""Records produced by the frozen backbones (or their stubs)."""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from .record_base import RecordBase


@dataclass
class SemanticGrid(RecordBase):
    """Text-conditioned embedding grid, `(h, w, c)` = 22 x 22 x 64 for CLIPSeg."""

    grid: Optional[torch.Tensor] = None
    source_text: str = ""
    source_size: Tuple[int, int] = (0, 0)

    @property
    def shape(self):
        return tuple(self.grid.shape)


@dataclass
class ImageEmbedding(RecordBase):
    """Image-encoder output, `(h, w, d)` = 64 x 64 x 256 for SAM."""

    grid: Optional[torch.Tensor] = None
    source_size: Tuple[int, int] = (0, 0)

    def channels_first(self) -> torch.Tensor:
        """`(1, d, h, w)` layout used by the mask decoder."""
        return self.grid.permute(2, 0, 1).unsqueeze(0)


@dataclass
class FrequencyMatrix(RecordBase):
    """The decoder's 2 x (d/2) Gaussian frequency matrix. Never trained."""

    B: Optional[torch.Tensor] = None

    @property
    def num_frequencies(self) -> int:
        return int(self.B.shape[1])

    @property
    def dim(self) -> int:
        return 2 * self.num_frequencies


@dataclass
class MaskBundle(RecordBase):
    """
    Decoder output for N prompt batches: one low-resolution mask logit map,
    one mask token and one predicted quality per batch.

    `valid_size` is the part of the low-resolution frame that covers the image
    (the decoder pads its input square at the bottom/right).
    """

    masks: Optional[torch.Tensor] = None  # N x h x w logits
    mask_tokens: Optional[torch.Tensor] = None  # N x d
    quality: Optional[torch.Tensor] = None  # N
    source_size: Tuple[int, int] = (0, 0)
    valid_size: Optional[Tuple[int, int]] = None

    def __len__(self):
        return int(self.masks.shape[0])

    @property
    def frame_size(self) -> Tuple[int, int]:
        return tuple(self.masks.shape[-2:])

    def _valid(self) -> Tuple[int, int]:
        return self.valid_size if self.valid_size is not None else self.frame_size

    def probabilities(self) -> torch.Tensor:
        return torch.sigmoid(self.masks)

    def upsample(self, size: Optional[Sequence[int]] = None) -> torch.Tensor:
        """Crop the padding and bilinearly resize the logits to `size` (image size by default)."""
        size = tuple(size or self.source_size)
        if len(self) == 0:
            return self.masks.new_zeros((0, *size))
        vh, vw = self._valid()
        cropped = self.masks[:, :vh, :vw].unsqueeze(1)
        return F.interpolate(cropped, size=size, mode="bilinear", align_corners=False).squeeze(1)

    def binary(self, size: Optional[Sequence[int]] = None) -> np.ndarray:
        """Masks thresholded at logit 0 at image resolution."""
        return (self.upsample(size) > 0).detach().cpu().numpy()

    def to_decoder_frame(self, masks) -> torch.Tensor:
        """
        Bring image-resolution binary masks `(M, H, W)` into the decoder's
        low-resolution frame so they can be compared with `self.masks`.
        """
        gt = torch.as_tensor(np.asarray(masks), dtype=self.masks.dtype, device=self.masks.device)
        h, w = self.frame_size
        if gt.shape[0] == 0:
            return gt.new_zeros((0, h, w))
        vh, vw = self._valid()
        soft = F.interpolate(gt.unsqueeze(1), size=(vh, vw), mode="area").squeeze(1)
        hard = (soft >= 0.5).to(soft.dtype)
        # thin instances may vanish at 0.5; keep any instance non-empty
        vanished = hard.flatten(1).sum(1) == 0
        if vanished.any():
            hard[vanished] = (soft[vanished] > 0).to(soft.dtype)
        return F.pad(hard, (0, w - vw, 0, h - vh))
