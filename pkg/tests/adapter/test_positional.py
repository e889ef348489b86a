"""
Dense Positional Encoding Tests
-------------------------------
Norm invariant, degenerate frequency matrices, grid layout and locality.
"""

import math

import numpy as np
import pytest
import torch

from src.adapter.positional import build_grid, encode_coords
from src.backbones.stub import stub_frequency_matrix
from src.core.records import FrequencyMatrix


class TestEncodeCoords:
    def test_norm_is_sqrt_half_dim(self):
        """Every grid vector has norm sqrt(128) for 10 seeded matrices."""
        for seed in range(10):
            dpe = build_grid(22, 22, stub_frequency_matrix(seed, 128))
            norms = dpe.grid.norm(dim=-1)
            torch.testing.assert_close(norms, torch.full_like(norms, math.sqrt(128)), rtol=0, atol=1e-6)

    def test_zero_matrix_gives_zeros_then_ones(self):
        """With B = 0 the encoding is [0...0 | 1...1]."""
        freq = FrequencyMatrix(B=torch.zeros(2, 4, dtype=torch.float64))
        out = encode_coords([0.3, 0.8], freq)
        assert out.tolist() == [0.0] * 4 + [1.0] * 4

    def test_center_encodes_to_zero_phase(self):
        """(0.5, 0.5) maps to c = 0, whatever the matrix."""
        out = encode_coords([0.5, 0.5], stub_frequency_matrix(3, 8))
        torch.testing.assert_close(out, torch.tensor([0.0] * 8 + [1.0] * 8, dtype=torch.float64))

    def test_point_symmetry(self):
        """Mirrored coordinates flip the sine half and keep the cosine half."""
        freq = stub_frequency_matrix(1, 16)
        a = encode_coords([0.2, 0.7], freq)
        b = encode_coords([0.8, 0.3], freq)
        torch.testing.assert_close(a[:16], -b[:16])
        torch.testing.assert_close(a[16:], b[16:])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            encode_coords([1.2, 0.5], stub_frequency_matrix(0, 4))

    def test_wrong_component_count_rejected(self):
        with pytest.raises(ValueError):
            encode_coords([0.1, 0.2, 0.3], stub_frequency_matrix(0, 4))


class TestBuildGrid:
    def test_single_cell_is_the_image_center(self):
        """A 1x1 grid encodes the center (0.5, 0.5)."""
        freq = stub_frequency_matrix(2, 8)
        grid = build_grid(1, 1, freq)
        torch.testing.assert_close(grid.grid[0, 0], encode_coords([0.5, 0.5], freq))

    def test_row_major_cell_centers(self):
        """Cell (i, j) encodes ((j + 0.5) / w, (i + 0.5) / h)."""
        freq = stub_frequency_matrix(4, 8)
        grid = build_grid(3, 5, freq)
        assert grid.size == (3, 5)
        torch.testing.assert_close(grid.grid[2, 1], encode_coords([1.5 / 5, 2.5 / 3], freq))
        torch.testing.assert_close(grid.flat()[2 * 5 + 1], grid.grid[2, 1])

    def test_neighbours_are_more_alike_than_distant_cells(self):
        """Averaged over 10 matrices, adjacent cells are closer in cosine than cells 10 apart."""
        near, far = [], []
        for seed in range(10):
            grid = build_grid(22, 22, stub_frequency_matrix(seed, 128)).grid
            unit = grid / grid.norm(dim=-1, keepdim=True)
            near.append((unit[:, :-1] * unit[:, 1:]).sum(-1).mean().item())
            far.append((unit[:, :-10] * unit[:, 10:]).sum(-1).mean().item())
        assert np.mean(near) > np.mean(far) + 0.3

    def test_cells_are_distinct(self):
        flat = build_grid(22, 22, stub_frequency_matrix(0, 128)).flat()
        assert len({tuple(v) for v in flat.round(decimals=6).tolist()}) == 484

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            build_grid(0, 4, stub_frequency_matrix(0, 4))
