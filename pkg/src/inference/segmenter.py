"""
Segmenter
---------
This module provides the Segmenter class, the controller that wires the frozen
backbones and the adapter into one image + text -> instance masks pipeline.

Key Features:
- One semantic grid, one image embedding and one decoder pass per image.
- Classifier filtering at a configurable threshold.
- Full-resolution binary masks for the kept instances.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from ..adapter.classifier import select
from ..adapter.model import DLOAdapter
from ..core.records import ClassifierOutput, KeptMasks, MaskBundle, PromptSet, RecordBase


@dataclass
class SegmentationResult(RecordBase):
    text: str = ""
    prompts: Optional[PromptSet] = None
    bundle: Optional[MaskBundle] = None
    classifier: Optional[ClassifierOutput] = None
    kept: Optional[KeptMasks] = None

    def kept_masks(self) -> np.ndarray:
        """Kept instances as `K x H x W` booleans at image resolution."""
        binary = self.bundle.binary()
        return binary[self.kept.indices]


class Segmenter:
    def __init__(self, model: DLOAdapter, gateway, threshold: float = 0.5, text: str = "cables"):
        """
        Initialize the Segmenter.

        Args:
            model: Trained adapter.
            gateway: Backbone gateway the adapter was built for.
            threshold: Classifier keep threshold.
            text: Default text prompt.
        """
        self.model = model
        self.gateway = gateway
        self.threshold = threshold
        self.text = text

    @torch.no_grad()
    def run(self, image: np.ndarray, text: Optional[str] = None, reference_mask: Optional[np.ndarray] = None) -> SegmentationResult:
        """
        Segment every DLO the text prompt refers to.

        Args:
            image: `H x W x 3` uint8 raster.
            text: Prompt, the segmenter default when None.
            reference_mask: Ground-truth semantic mask, needed by the stub backbone only.

        Returns:
            SegmentationResult: prompts, decoded masks, classifier decisions and kept masks.
        """
        text = text or self.text
        self.model.eval()
        grid = self.gateway.semantic_grid(image, text, reference_mask)
        embedding = self.gateway.image_embedding(image)
        prompts = self.model.encode(grid)
        bundle = self.gateway.decode(embedding, prompts)
        decision = self.model.classify(prompts, bundle, self.threshold)
        return SegmentationResult(
            text=text,
            prompts=prompts,
            bundle=bundle,
            classifier=decision,
            kept=select(decision, bundle, self.threshold),
        )
