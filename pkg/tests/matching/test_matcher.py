"""
Matching Tests
--------------
Optimality against brute force, the deterministic tie-break, classifier
labels and Oracle filtering.
"""

import itertools

import numpy as np
import pytest
import torch

from src.losses import dice_loss, focal_loss
from src.matching import cost_matrix, labels_from_matching, matcher, oracle_filter, pairwise_iou, solve_assignment


def _assignments(n: int, m: int):
    """Every injective assignment of size min(n, m), as a per-prediction tuple (None when unmatched)."""
    k = int(min(n, m))
    for preds in itertools.combinations(range(n), k):
        for gts in itertools.permutations(range(m), k):
            row = [None] * n
            for p, g in zip(preds, gts):
                row[p] = g
            yield tuple(row)


def _total(cost, row):
    return sum(cost[p, g] for p, g in enumerate(row) if g is not None)


def _rank(row, m):
    return tuple(m if g is None else g for g in row)


class TestSolveAssignment:
    def test_optimal_against_brute_force(self):
        """Total cost equals the brute-force minimum on 500 random matrices."""
        rng = np.random.default_rng(0)
        for _ in range(500):
            n, m = rng.integers(1, 7, size=2)
            cost = rng.random((n, m))
            result = solve_assignment(cost)
            best = min(_total(cost, row) for row in _assignments(n, m))
            assert len(result.pairs) == min(n, m)
            assert abs(sum(result.pair_costs) - best) < 1e-9

    def test_tie_break_is_lexicographic(self):
        """Among optimal assignments the lexicographically smallest one is returned."""
        rng = np.random.default_rng(1)
        for _ in range(200):
            n, m = rng.integers(1, 5, size=2)
            cost = rng.integers(0, 3, size=(n, m)).astype(float)
            rows = list(_assignments(n, m))
            best = min(_total(cost, row) for row in rows)
            expected = min((row for row in rows if _total(cost, row) == best), key=lambda r: _rank(r, m))
            got = [None] * n
            for p, g in solve_assignment(cost).pairs:
                got[p] = g
            assert tuple(got) == expected

    def test_all_ties_match_diagonal(self):
        result = solve_assignment(np.zeros((3, 3)))
        assert result.pairs == [(0, 0), (1, 1), (2, 2)]

    def test_more_predictions_than_targets(self):
        cost = np.array([[5.0, 5.0], [1.0, 9.0], [9.0, 1.0]])
        result = solve_assignment(cost)
        assert result.pairs == [(1, 0), (2, 1)]
        assert result.unmatched_preds == [0]
        assert result.unmatched_gts == []

    def test_empty_sides(self):
        """A side of size 0 yields no pair."""
        result = solve_assignment(np.zeros((3, 0)))
        assert result.pairs == []
        assert result.unmatched_preds == [0, 1, 2]
        assert solve_assignment(np.zeros((0, 2))).unmatched_gts == [0, 1]

    def test_non_finite_cost_is_rejected(self):
        with pytest.raises(ValueError):
            solve_assignment(np.array([[0.0, np.nan], [1.0, 2.0]]))

    def test_rejected_tie_break_falls_back_to_solver(self, monkeypatch):
        """When no candidate passes the optimality check the solver pairing is returned whole."""
        monkeypatch.setattr(matcher, "_completion", lambda *args: None)
        cost = np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0], [0.5, 6.0, 1.0]])
        result = solve_assignment(cost)
        assert len(result.pairs) == 3
        assert result.pairs == [(1, 1), (2, 2), (3, 0)]
        assert sum(result.pair_costs) == pytest.approx(2.5)
        assert result.unmatched_preds == [0]
        assert result.unmatched_gts == []


class TestCostMatrix:
    def test_entries_equal_pair_loss(self):
        """Entry (i, j) is 20 focal + 1 DICE of prediction i against submask j."""
        g = torch.Generator().manual_seed(2)
        pred = torch.rand(4, 6, 6, generator=g, dtype=torch.float64)
        gt = torch.rand(3, 6, 6, generator=g, dtype=torch.float64) > 0.6
        cost = cost_matrix(pred, gt.numpy())
        assert cost.shape == (4, 3)
        for i in range(4):
            for j in range(3):
                expected = 20 * focal_loss(pred[i], gt[j]) + dice_loss(pred[i], gt[j])
                assert cost[i, j].item() == pytest.approx(expected.item(), abs=1e-9)

    def test_cost_falls_as_prediction_nears_target(self):
        """Moving a prediction toward a submask lowers its cost against it."""
        g = torch.Generator().manual_seed(3)
        for _ in range(20):
            pred = torch.rand(8, 8, generator=g, dtype=torch.float64) * 0.9 + 0.05
            gt = (torch.rand(1, 8, 8, generator=g, dtype=torch.float64) > 0.5).to(torch.float64)
            steps = torch.tensor([0.0, 0.25, 0.5, 0.75, 0.95], dtype=torch.float64)
            preds = torch.stack([pred + t * (gt[0] - pred) for t in steps])
            costs = cost_matrix(preds, gt)[:, 0]
            assert (costs[1:] < costs[:-1]).all()


class TestLabels:
    def test_matched_predictions_are_positive(self):
        result = solve_assignment(np.array([[5.0, 5.0], [1.0, 9.0], [9.0, 1.0]]))
        assert labels_from_matching(result, 3).tolist() == [0.0, 1.0, 1.0]

    def test_random_matches(self):
        """On 100 random matchings every matched prediction, and only those, is labeled 1."""
        rng = np.random.default_rng(2)
        for _ in range(100):
            n, m = rng.integers(1, 12, size=2)
            result = solve_assignment(rng.random((n, m)))
            labels = labels_from_matching(result, n)
            matched = {p for p, _ in result.pairs}
            assert labels.tolist() == [1.0 if i in matched else 0.0 for i in range(n)]

    def test_no_match_gives_all_negative(self):
        assert labels_from_matching(solve_assignment(np.zeros((2, 0))), 2).tolist() == [0.0, 0.0]


class TestOracle:
    def setup_method(self):
        self.gt = np.zeros((2, 8, 8), dtype=bool)
        self.gt[0, :4] = True
        self.gt[1, :, :3] = True

    def test_keeps_the_masks_matching_each_target(self):
        """Copies of the targets among noise are found by IoU."""
        pred = torch.zeros(4, 8, 8, dtype=torch.float64)
        pred[1] = torch.from_numpy(self.gt[1]).to(torch.float64) * 0.9
        pred[3] = torch.from_numpy(self.gt[0]).to(torch.float64) * 0.9
        pred[0, 6:, 6:] = 0.9
        kept = oracle_filter(pred, self.gt)
        assert kept.indices == [1, 3]
        assert kept.gt_indices == [1, 0]
        assert kept.masks.shape == (2, 8, 8)

    def test_loss_objective(self):
        pred = torch.full((3, 8, 8), 0.1, dtype=torch.float64)
        pred[2] = torch.from_numpy(self.gt[0]).to(torch.float64) * 0.8 + 0.1
        kept = oracle_filter(pred, self.gt, objective="loss")
        assert len(kept.indices) == 2
        assert 2 in kept.indices
        assert kept.gt_indices[kept.indices.index(2)] == 0

    def test_unknown_objective(self):
        with pytest.raises(ValueError):
            oracle_filter(torch.zeros(1, 8, 8), self.gt, objective="area")


class TestPairwiseIoU:
    def test_values(self):
        a = np.zeros((2, 4, 4), dtype=bool)
        a[0, :2] = True
        b = np.zeros((2, 4, 4), dtype=bool)
        b[0, :1] = True
        iou = pairwise_iou(a, b)
        assert iou[0, 0] == pytest.approx(0.5)
        assert iou[1, 0] == 0.0
        assert iou[1, 1] == 1.0
