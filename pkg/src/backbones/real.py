"""
Real backbones: CLIPSeg (transformers) for the semantic grid and SAM
(segment_anything) for the image embedding and mask decoding.

Both packages are imported on first use so stub runs never need them.
"""

import math
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import torch
from PIL import Image

from ..core.config import AdapterConfig, BackboneConfig
from ..core.records import FrequencyMatrix, ImageEmbedding, MaskBundle, PromptSet, SemanticGrid
from ..core.utils import BackboneUnavailableError, ConfigError
from .gateway import BackboneGateway, logger

SAM_HINT = (
    "download the SAM checkpoint (e.g. sam_vit_l_0b3195.pth from the segment-anything release page) "
    "and point backbone.sam_checkpoint or DLO_SAM_CHECKPOINT at it"
)
CLIPSEG_HINT = (
    "install transformers and make the CLIPSeg weights available "
    "(backbone.clipseg_checkpoint, default CIDAS/clipseg-rd64-refined, downloaded from the Hugging Face hub)"
)


def _load_clipseg(checkpoint: str, device):
    try:
        from transformers import CLIPSegForImageSegmentation, CLIPSegProcessor
    except ImportError as e:
        raise BackboneUnavailableError(f"transformers is not installed ({e}); {CLIPSEG_HINT}")
    try:
        processor = CLIPSegProcessor.from_pretrained(checkpoint)
        model = CLIPSegForImageSegmentation.from_pretrained(checkpoint)
    except (OSError, ValueError) as e:
        raise BackboneUnavailableError(f"Cannot load CLIPSeg checkpoint '{checkpoint}': {e}; {CLIPSEG_HINT}")
    return model.to(device).eval(), processor


def _load_sam(model_type: str, checkpoint: Optional[str], device):
    if not checkpoint or not Path(checkpoint).is_file():
        raise BackboneUnavailableError(f"SAM checkpoint not found ({checkpoint}); {SAM_HINT}")
    try:
        from segment_anything import sam_model_registry
    except ImportError as e:
        raise BackboneUnavailableError(f"segment_anything is not installed ({e}); {SAM_HINT}")
    if model_type not in sam_model_registry:
        raise ConfigError(f"Unknown SAM model type '{model_type}', expected one of {sorted(sam_model_registry)}")
    sam = sam_model_registry[model_type](checkpoint=checkpoint)
    return sam.to(device).eval()


class RealGateway(BackboneGateway):
    mode = "real"

    def __init__(self, backbone_cfg: BackboneConfig, adapter_cfg: AdapterConfig, dtype=torch.float32):
        super().__init__(backbone_cfg, adapter_cfg, dtype)
        self._sam = _load_sam(backbone_cfg.sam_model_type, backbone_cfg.sam_checkpoint, self.device)
        self._clipseg, self._processor = _load_clipseg(backbone_cfg.clipseg_checkpoint, self.device)
        for module in (self._clipseg, self._sam):
            module.requires_grad_(False)

        from segment_anything.utils.transforms import ResizeLongestSide

        self._transform = ResizeLongestSide(self._sam.image_encoder.img_size)
        sam_dim = self._sam.prompt_encoder.embed_dim
        if sam_dim != adapter_cfg.embed_dim:
            raise ConfigError(f"adapter.embed_dim is {adapter_cfg.embed_dim} but the SAM decoder expects {sam_dim}")
        reduce_dim = self._clipseg.config.reduce_dim
        if reduce_dim != adapter_cfg.semantic_dim:
            raise ConfigError(f"adapter.semantic_dim is {adapter_cfg.semantic_dim} but CLIPSeg reduces to {reduce_dim}")
        logger.info("Loaded CLIPSeg '%s' and SAM '%s'", backbone_cfg.clipseg_checkpoint, backbone_cfg.sam_model_type)

    @property
    def mask_frame(self) -> Tuple[int, int]:
        size = self._sam.image_encoder.img_size // 4
        return size, size

    def frequency_matrix(self) -> FrequencyMatrix:
        pe_layer = getattr(self._sam.prompt_encoder, "pe_layer", None)
        B = getattr(pe_layer, "positional_encoding_gaussian_matrix", None)
        if B is None:
            raise BackboneUnavailableError(f"SAM checkpoint has no positional-encoding frequency matrix; {SAM_HINT}")
        return FrequencyMatrix(B=B.detach().clone())

    def label_embeddings(self) -> torch.Tensor:
        pe = self._sam.prompt_encoder
        return torch.stack(
            [
                pe.point_embeddings[1].weight[0],  # foreground
                pe.point_embeddings[0].weight[0],  # background
                pe.not_a_point_embed.weight[0],
            ]
        ).detach().clone()

    def frozen_state(self) -> Dict[str, torch.Tensor]:
        state = {f"clipseg.{k}": v for k, v in self._clipseg.state_dict().items()}
        state.update({f"sam.{k}": v for k, v in self._sam.state_dict().items()})
        return state

    @torch.no_grad()
    def _semantic_grid(self, image: np.ndarray, text: str, reference_mask: Optional[np.ndarray]) -> SemanticGrid:
        captured = {}

        def hook(_module, inputs):
            captured["grid"] = inputs[0].detach()

        handle = self._clipseg.decoder.transposed_convolution.register_forward_pre_hook(hook)
        try:
            inputs = self._processor(text=[text], images=[Image.fromarray(image)], return_tensors="pt")
            self._clipseg(**{k: v.to(self.device) for k, v in inputs.items()})
        finally:
            handle.remove()
        grid = captured["grid"][0].permute(1, 2, 0).to(self.dtype)
        return SemanticGrid(grid=grid, source_text=text, source_size=tuple(image.shape[:2]))

    @torch.no_grad()
    def _image_embedding(self, image: np.ndarray) -> ImageEmbedding:
        resized = self._transform.apply_image(image)
        x = torch.as_tensor(resized, device=self.device).permute(2, 0, 1).contiguous()[None]
        features = self._sam.image_encoder(self._sam.preprocess(x.float()))
        return ImageEmbedding(grid=features[0].permute(1, 2, 0).to(self.dtype), source_size=tuple(image.shape[:2]))

    def _valid_size(self, source_size) -> Tuple[int, int]:
        img_size = self._sam.image_encoder.img_size
        h, w = self._transform.get_preprocess_shape(source_size[0], source_size[1], img_size)
        frame_h, frame_w = self.mask_frame
        return math.ceil(h * frame_h / img_size), math.ceil(w * frame_w / img_size)

    def _decode(self, emb: ImageEmbedding, prompts: PromptSet) -> MaskBundle:
        """Run the mask decoder with the adapter's tokens as sparse prompts and the no-mask dense prompt."""
        decoder = self._sam.mask_decoder
        prompt_encoder = self._sam.prompt_encoder
        sparse = prompts.final_tokens
        n = sparse.shape[0]

        image_embedding = emb.channels_first().to(sparse)
        _, c, h, w = image_embedding.shape
        dense = prompt_encoder.no_mask_embed.weight.reshape(1, -1, 1, 1).expand(n, -1, h, w)
        image_pe = prompt_encoder.get_dense_pe()

        output_tokens = torch.cat([decoder.iou_token.weight, decoder.mask_tokens.weight], dim=0)
        tokens = torch.cat([output_tokens.unsqueeze(0).expand(n, -1, -1), sparse], dim=1)
        src = torch.repeat_interleave(image_embedding, n, dim=0) + dense
        pos_src = torch.repeat_interleave(image_pe, n, dim=0)

        hs, src = decoder.transformer(src, pos_src, tokens)
        iou_token_out = hs[:, 0, :]
        mask_tokens_out = hs[:, 1 : 1 + decoder.num_mask_tokens, :]

        upscaled = decoder.output_upscaling(src.transpose(1, 2).reshape(n, c, h, w))
        hyper_in = torch.stack(
            [decoder.output_hypernetworks_mlps[i](mask_tokens_out[:, i, :]) for i in range(decoder.num_mask_tokens)],
            dim=1,
        )
        _, uc, uh, uw = upscaled.shape
        masks = (hyper_in @ upscaled.reshape(n, uc, uh * uw)).reshape(n, -1, uh, uw)
        quality = decoder.iou_prediction_head(iou_token_out)

        # single-mask output: first mask token only
        return MaskBundle(
            masks=masks[:, 0],
            mask_tokens=mask_tokens_out[:, 0],
            quality=quality[:, 0],
            source_size=emb.source_size,
            valid_size=self._valid_size(emb.source_size),
        )
