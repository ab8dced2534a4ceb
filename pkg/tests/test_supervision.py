"""Ordinal relations and the ranking / keypoint / combined losses."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ordpose.errors import ContractViolationError, DimensionMismatchError, InvalidInputError
from ordpose.supervision import (
    DEFAULT_LAMBDA,
    DEFAULT_TIE_THRESHOLD_MM,
    OrdinalRelation,
    RelationSet,
    combined_weak_loss,
    keypoint_loss,
    pair_rank_loss,
    rank_loss,
    relations_from_depths,
)

LN2 = float(np.log(2.0))


class TestOrdinalRelation:
    def test_same_joint_rejected(self):
        with pytest.raises(ContractViolationError):
            OrdinalRelation(1, 1, 0)

    def test_bad_r_rejected(self):
        with pytest.raises(ContractViolationError):
            OrdinalRelation(0, 1, 2)

    def test_duplicate_unordered_pair_rejected(self):
        rels = RelationSet([OrdinalRelation(0, 1, +1)])
        with pytest.raises(ContractViolationError):
            rels.add(OrdinalRelation(1, 0, -1))

    def test_json_round_trip(self):
        rels = RelationSet([OrdinalRelation(0, 5, 1), OrdinalRelation(1, 2, 0)])
        back = RelationSet.from_json(rels.to_json())
        assert [(r.i, r.j, r.r) for r in back] == [(0, 5, 1), (1, 2, 0)]
        assert rels.to_json() == {"pairs": [{"i": 0, "j": 5, "r": 1}, {"i": 1, "j": 2, "r": 0}]}


class TestRelationsFromDepths:
    def test_strict_gap_beyond_default_threshold(self):
        # 150 mm apart at the default 100 mm threshold: i is strictly closer
        rels = relations_from_depths([100.0, 250.0], DEFAULT_TIE_THRESHOLD_MM)
        assert [(r.i, r.j, r.r) for r in rels] == [(0, 1, +1)]

    def test_within_threshold_is_tie(self):
        rels = relations_from_depths([100.0, 150.0], 100.0)
        assert list(rels)[0].r == 0

    def test_threshold_zero_only_exact_ties(self):
        rels = relations_from_depths([5.0, 5.0, 5.0 + 1e-12], 0.0)
        by_pair = {(r.i, r.j): r.r for r in rels}
        assert by_pair[(0, 1)] == 0
        assert by_pair[(0, 2)] == +1
        assert by_pair[(1, 2)] == +1

    def test_emits_all_pairs(self):
        z = np.arange(14) * 200.0
        assert len(relations_from_depths(z)) == 91

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidInputError):
            relations_from_depths([0.0, np.inf])

    def test_negative_threshold_rejected(self):
        with pytest.raises(ContractViolationError):
            relations_from_depths([0.0, 1.0], -1.0)


class TestPairRankLoss:
    def test_equal_depths_strict(self):
        loss, gi, gj = pair_rank_loss(0.0, 0.0, +1)
        assert loss == pytest.approx(LN2, abs=1e-12)
        assert gi == pytest.approx(0.5, abs=1e-12)
        assert gj == pytest.approx(-0.5, abs=1e-12)

    def test_equal_depths_tie(self):
        assert pair_rank_loss(0.0, 0.0, 0) == (0.0, 0.0, -0.0)

    def test_satisfied_margin_oracle(self):
        # softplus(-6) and sigmoid(-6), checked against high-precision values
        softplus_m6 = 0.0024756851377304495  # log(1 + exp(-6)) to 50-digit precision
        sigmoid_m6 = 0.0024726231566347743
        loss, gi, gj = pair_rank_loss(-3.0, 3.0, +1)
        assert loss == pytest.approx(softplus_m6, rel=1e-12)
        assert gi == pytest.approx(sigmoid_m6, rel=1e-12)
        assert gj == pytest.approx(-sigmoid_m6, rel=1e-12)

    def test_no_overflow_at_huge_margin(self):
        loss, gi, gj = pair_rank_loss(1e6, -1e6, +1)
        assert np.isfinite(loss) and loss == pytest.approx(2e6)
        assert gi == pytest.approx(1.0)
        loss2, _, _ = pair_rank_loss(-1e6, 1e6, +1)
        assert loss2 == 0.0  # softplus underflows cleanly, no overflow

    def test_invalid_r(self):
        with pytest.raises(ContractViolationError):
            pair_rank_loss(0.0, 0.0, 3)

    @given(
        zi=st.floats(-50, 50),
        zj=st.floats(-50, 50),
        r=st.sampled_from([+1, -1]),
    )
    @settings(max_examples=200, deadline=None)
    def test_antisymmetry(self, zi, zj, r):
        li, gi, gj = pair_rank_loss(zi, zj, r)
        lj, gj2, gi2 = pair_rank_loss(zj, zi, -r)
        assert li == lj
        assert gi == gi2 and gj == gj2

    @given(gap=st.floats(-30, 30), delta=st.floats(1e-6, 5))
    @settings(max_examples=200, deadline=None)
    def test_monotonicity_r_plus(self, gap, delta):
        # for r = +1 the loss strictly decreases as z_j - z_i grows
        worse, _, _ = pair_rank_loss(0.0, gap, +1)
        better, _, _ = pair_rank_loss(0.0, gap + delta, +1)
        assert better < worse


class TestRankLoss:
    def test_empty_set(self):
        loss, grad = rank_loss(np.zeros(4), RelationSet())
        assert loss == 0.0 and np.all(grad == 0.0)

    def test_inconsistent_pair_cancels(self):
        # contradictory annotations on the same pair: loss 2 ln 2, zero gradient
        z = np.zeros(3)
        loss, grad = rank_loss(z, [OrdinalRelation(1, 2, +1), OrdinalRelation(2, 1, +1)])
        assert loss == pytest.approx(2.0 * LN2, abs=1e-12)
        assert np.allclose(grad, 0.0, atol=1e-15)

    def test_matches_naive_loop(self, rng):
        for _ in range(20):
            n = int(rng.integers(3, 10))
            z = rng.normal(0, 3, size=n)
            rels = relations_from_depths(rng.normal(0, 3, size=n), 0.5)
            loss, grad = rank_loss(z, rels)
            exp_loss, exp_grad = 0.0, np.zeros(n)
            for rel in rels:
                l, gi, gj = pair_rank_loss(z[rel.i], z[rel.j], rel.r)
                exp_loss += l
                exp_grad[rel.i] += gi
                exp_grad[rel.j] += gj
            assert loss == pytest.approx(exp_loss, abs=1e-12)
            assert np.allclose(grad, exp_grad, atol=1e-12)

    @given(c=st.floats(-100, 100))
    @settings(max_examples=100, deadline=None)
    def test_shift_invariance(self, c):
        z = np.array([0.3, -1.2, 2.5, 0.0])
        rels = relations_from_depths(np.array([1.0, 3.0, 2.0, 1.0]), 0.0)
        base, _ = rank_loss(z, rels)
        shifted, _ = rank_loss(z + c, rels)
        assert shifted == pytest.approx(base, rel=1e-9, abs=1e-9)

    def test_mean_reduction(self):
        z = np.array([0.0, 1.0, 2.0])
        rels = relations_from_depths(np.array([3.0, 2.0, 1.0]), 0.0)
        l_sum, g_sum = rank_loss(z, rels, reduction="sum")
        l_mean, g_mean = rank_loss(z, rels, reduction="mean")
        assert l_mean == pytest.approx(l_sum / 3.0)
        assert np.allclose(g_mean, g_sum / 3.0)
        with pytest.raises(ContractViolationError):
            rank_loss(z, rels, reduction="median")

    def test_out_of_range_index(self):
        with pytest.raises(IndexError):
            rank_loss(np.zeros(2), [OrdinalRelation(0, 5, 1)])


class TestKeypointLoss:
    def test_zero_on_equal(self, rng):
        p = rng.normal(size=(5, 2))
        loss, grad = keypoint_loss(p, p)
        assert loss == 0.0 and np.all(grad == 0.0)

    def test_single_offset_joint(self):
        gt = np.zeros((3, 2))
        pred = gt.copy()
        pred[1, 0] = 1.0
        loss, grad = keypoint_loss(pred, gt)
        assert loss == 1.0
        assert np.allclose(grad[1], [2.0, 0.0])
        assert np.all(grad[[0, 2]] == 0.0)

    def test_visibility_masks_joints(self, rng):
        pred = rng.normal(size=(4, 2))
        gt = rng.normal(size=(4, 2))
        vis = np.array([True, False, True, False])
        loss, grad = keypoint_loss(pred, gt, vis)
        expected = float(np.sum((pred[vis] - gt[vis]) ** 2))
        assert loss == pytest.approx(expected, abs=1e-12)
        assert np.all(grad[~vis] == 0.0)

    def test_matches_loop_oracle(self, rng):
        pred = rng.normal(size=(7, 2))
        gt = rng.normal(size=(7, 2))
        expected = sum(
            (pred[k, d] - gt[k, d]) ** 2 for k in range(7) for d in range(2)
        )
        loss, _ = keypoint_loss(pred, gt)
        assert loss == pytest.approx(expected, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            keypoint_loss(np.zeros((3, 2)), np.zeros((4, 2)))
        with pytest.raises(DimensionMismatchError):
            keypoint_loss(np.zeros((3, 2)), np.zeros((3, 2)), np.ones(2, dtype=bool))


class TestCombinedWeakLoss:
    def test_lambda_zero_reduces_to_rank(self, rng):
        n = 5
        z = rng.normal(size=n)
        rels = relations_from_depths(rng.normal(size=n), 0.0)
        pred = rng.normal(size=(n, 2))
        gt = rng.normal(size=(n, 2))
        loss, g_z, g_2d = combined_weak_loss(z, rels, pred, gt, lam=0.0)
        ref_loss, ref_grad = rank_loss(z, rels)
        assert loss == pytest.approx(ref_loss, abs=1e-12)
        assert np.allclose(g_z, ref_grad)
        assert np.all(g_2d == 0.0)

    def test_satisfied_rank_leaves_keypoint_term(self, rng):
        # margins >= 20 drive the rank term below 1e-6
        z = np.array([0.0, 20.0, 40.0, 60.0])
        rels = relations_from_depths(z, 0.0)
        pred = rng.normal(size=(4, 2))
        gt = rng.normal(size=(4, 2))
        loss, _, _ = combined_weak_loss(z, rels, pred, gt)
        l_keyp, _ = keypoint_loss(pred, gt)
        assert abs(loss - DEFAULT_LAMBDA * l_keyp) < 1e-6

    def test_default_lambda_is_100(self):
        assert DEFAULT_LAMBDA == 100.0
