"""
Overlay and instance-mask output of a segmentation result.

Instance k is painted with color k of the fixed tab10 palette, so figures are
reproducible across runs.
"""

import json
from pathlib import Path
from typing import Dict, Sequence, Union

import matplotlib
import numpy as np
from PIL import Image

from ..core.utils import RasterIOError
from .segmenter import SegmentationResult

PALETTE = "tab10"
ALPHA = 0.55


def instance_colors(n: int) -> np.ndarray:
    """`n x 3` uint8 colors, cycling through the palette."""
    cmap = matplotlib.colormaps[PALETTE]
    colors = [cmap(k % cmap.N)[:3] for k in range(n)]
    return (np.asarray(colors, dtype=np.float64).reshape(n, 3) * 255).round().astype(np.uint8)


def render_overlay(image: np.ndarray, masks: np.ndarray, alpha: float = ALPHA) -> np.ndarray:
    """Blend every mask into the image with its palette color; later instances paint over earlier ones."""
    out = image.astype(np.float64)
    for mask, color in zip(np.asarray(masks, dtype=bool), instance_colors(len(masks))):
        out[mask] = (1 - alpha) * out[mask] + alpha * color
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def summary(result: SegmentationResult) -> Dict:
    kept = result.kept.indices
    masks = result.kept_masks()
    probabilities = result.classifier.probabilities.detach().cpu().tolist()
    return {
        "text": result.text,
        "threshold": result.classifier.threshold,
        "n_prompts": len(result.bundle),
        "n_kept": len(kept),
        "instances": [
            {
                "instance": k,
                "prompt": int(index),
                "probability": float(probabilities[index]),
                "area": int(mask.sum()),
                "file": f"instance_{k:02d}.png",
            }
            for k, (index, mask) in enumerate(zip(kept, masks))
        ],
    }


def write_outputs(image: np.ndarray, result: SegmentationResult, output_dir: Union[str, Path]) -> Dict[str, Sequence[Path]]:
    """
    Write `overlay.png`, one `instance_XX.png` per kept mask and `summary.json`.

    Raises:
        RasterIOError: a file cannot be written.
    """
    output_dir = Path(output_dir)
    masks = result.kept_masks()
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        overlay = output_dir / "overlay.png"
        Image.fromarray(render_overlay(image, masks)).save(overlay)
        instances = []
        for k, mask in enumerate(masks):
            path = output_dir / f"instance_{k:02d}.png"
            Image.fromarray(mask.astype(np.uint8) * 255).save(path)
            instances.append(path)
        summary_path = output_dir / "summary.json"
        summary_path.write_text(json.dumps(summary(result), indent=2), encoding="utf-8")
    except OSError as e:
        raise RasterIOError(f"Cannot write inference outputs to {output_dir}: {e}")
    return {"overlay": [overlay], "instances": instances, "summary": [summary_path]}
