"""
Dense positional encoding (DPE) of the semantic patch grid.

Random Fourier features computed with the mask decoder's own frequency matrix,
so the encodings the sampler mixes are vectors the decoder already reads as
point positions.
"""

import math
from typing import Sequence, Union

import torch

from ..core.records import DPEGrid, FrequencyMatrix


def encode_coords(xy: Union[torch.Tensor, Sequence[float]], freq: FrequencyMatrix) -> torch.Tensor:
    """
    Encode normalized coordinates.

    Args:
        xy: `(..., 2)` coordinates `(x, y)` in `[0, 1]`.
        freq: Frequency matrix `B` of shape `2 x d/2`.

    Returns:
        torch.Tensor: `(..., d)` vectors `[sin(2pi c B) | cos(2pi c B)]` with
        `c = 2 xy - 1`; every vector has norm `sqrt(d/2)`.

    Raises:
        ValueError: a coordinate lies outside `[0, 1]`.
    """
    B = freq.B
    xy = torch.as_tensor(xy, dtype=B.dtype, device=B.device)
    if xy.shape[-1] != 2:
        raise ValueError(f"Coordinates must have 2 components, got shape {tuple(xy.shape)}")
    if bool((xy < 0).any()) or bool((xy > 1).any()):
        raise ValueError("Normalized coordinates must lie in [0, 1]")
    c = 2 * xy - 1
    proj = 2 * math.pi * (c @ B)
    return torch.cat([torch.sin(proj), torch.cos(proj)], dim=-1)


def build_grid(h: int, w: int, freq: FrequencyMatrix) -> DPEGrid:
    """Encode the center of every cell of an `h x w` grid, row-major."""
    if h < 1 or w < 1:
        raise ValueError(f"Grid size must be positive, got {h}x{w}")
    B = freq.B
    ys = (torch.arange(h, dtype=B.dtype, device=B.device) + 0.5) / h
    xs = (torch.arange(w, dtype=B.dtype, device=B.device) + 0.5) / w
    yy, xx = torch.meshgrid(ys, xs, indexing="ij")
    coords = torch.stack([xx, yy], dim=-1)
    return DPEGrid(grid=encode_coords(coords, freq), freq=freq)
