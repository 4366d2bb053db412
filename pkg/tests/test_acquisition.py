import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_gp, random_mf_model
from oracles import brute_force_select, naive_variance
from mfas.acquisition import (
    CandidatePool,
    CostModel,
    PoolExhaustedError,
    if_ucr_bel_scores,
    select_if_ucr,
    select_if_ucr_bel,
    select_mf_ucr,
    select_uncertainty,
)
from mfas.gp_core import CondensedGP, Hyperparameters, TrainingSet
from mfas.mf_model import FidelityLevel, MultiFidelityModel

LOW, HIGH = FidelityLevel.LOW, FidelityLevel.HIGH
SELECTORS = {"mf_ucr": select_mf_ucr, "if_ucr": select_if_ucr, "if_ucr_bel": select_if_ucr_bel}


class StubModel:
    """Model with prescribed per-point standard deviations (first input coordinate indexes a table)."""

    def __init__(self, sd_eta, sd_delta):
        self.sd_eta = np.asarray(sd_eta, dtype=float)
        self.sd_delta = np.asarray(sd_delta, dtype=float)

    def predict_many(self, X):
        i = np.asarray(X)[:, 0].astype(int)
        ve, vd = self.sd_eta[i] ** 2, self.sd_delta[i] ** 2
        return np.zeros(len(i)), ve + vd, ve, vd


class TestCostModel:
    def test_from_ratio(self):
        c = CostModel.from_ratio("10:1")
        assert (c.cost_high, c.cost_low) == (10.0, 1.0)

    @pytest.mark.parametrize("text", ["10", "a:b", "1:2", "0:0"])
    def test_invalid(self, text):
        with pytest.raises(ValueError):
            CostModel.from_ratio(text)


class TestCandidatePool:
    def test_consume(self):
        pool = CandidatePool(np.zeros((3, 1)), np.zeros((2, 1)))
        pool.consume(LOW, 1)
        np.testing.assert_array_equal(pool.available(LOW), [0, 2])
        assert pool.remaining() == (2, 2)
        with pytest.raises(ValueError):
            pool.consume(LOW, 1)


class TestSelectUncertainty:
    def test_distant_point_beats_training_point(self):
        gp = CondensedGP(Hyperparameters(1.0, [5.0], 0.0), TrainingSet([[0.2]], [1.0]))
        assert select_uncertainty(gp, [[0.2], [0.9]]).index == 1

    def test_single_row(self):
        gp = CondensedGP(Hyperparameters(1.0, [5.0], 0.0), TrainingSet([[0.2]], [1.0]))
        d = select_uncertainty(gp, [[0.5]])
        assert d.index == 0
        np.testing.assert_array_equal(d.point, [0.5])

    def test_matches_exhaustive_scan(self, rng):
        gp = CondensedGP(Hyperparameters(1.0, [8.0], 0.05), TrainingSet([[0.4]], [0.0]))
        pool = rng.random((3, 1))
        expected = int(np.argmax([naive_variance(gp.train.inputs, gp.hyper, x) for x in pool]))
        assert select_uncertainty(gp, pool).index == expected

    def test_ties_go_to_lowest_index(self):
        gp = CondensedGP(Hyperparameters(1.0, [5.0], 0.0), TrainingSet([[0.0]], [1.0]))
        assert select_uncertainty(gp, [[50.0], [60.0]]).index == 0

    def test_empty_pool(self):
        gp = random_gp(np.random.default_rng(0), 2, 1)
        with pytest.raises(ValueError):
            select_uncertainty(gp, np.empty((0, 1)))


class TestMaxMFUCR:
    def test_equal_ratio_tie_goes_low(self):
        model = StubModel([1.0, 0.5], [1.0, 0.5])
        pool = CandidatePool([[0.0], [1.0]], [[1.0]])
        d = select_mf_ucr(model, pool, CostModel(1.0, 1.0))
        assert d.level is LOW and d.index == 0

    def test_rule_arithmetic(self):
        # sigma_eta/C_L = 2, sigma_delta/C_H = 0.8
        model = StubModel([2.0], [4.0])
        d = select_mf_ucr(model, CandidatePool([[0.0]], [[0.0]]), CostModel(1.0, 5.0))
        assert d.level is LOW

    def test_snaps_to_nearest_in_other_pool(self):
        # argmax is LF row 1 (x=1); the rule asks for High, nearest unconsumed HF row is x=3
        model = StubModel([0.1, 0.1, 0.1, 0.1], [0.1, 5.0, 0.1, 0.1])
        pool = CandidatePool([[0.0], [1.0]], [[1.0], [3.0]])
        pool.consume(HIGH, 0)
        d = select_mf_ucr(model, pool, CostModel(1.0, 1.0))
        assert d.level is HIGH and d.index == 1
        np.testing.assert_array_equal(d.point, [3.0])

    def test_snap_from_high_pool_to_low(self):
        model = StubModel([3.0, 3.0, 3.0, 3.0], [0.1, 0.1, 0.1, 1.0])
        pool = CandidatePool([[0.0], [2.0]], [[3.0]])
        d = select_mf_ucr(model, pool, CostModel(1.0, 2.0))
        assert d.level is LOW
        np.testing.assert_array_equal(d.point, [2.0])

    def test_exhausted_chosen_pool(self):
        model = StubModel([3.0, 3.0], [0.1, 0.1])
        pool = CandidatePool([[0.0]], [[1.0]])
        pool.consume(LOW, 0)
        with pytest.raises(PoolExhaustedError, match="low"):
            select_mf_ucr(model, pool, CostModel(1.0, 2.0))


class TestMaxIFUCR:
    def test_dominance_gives_low(self):
        model = StubModel([2.0, 2.0, 2.0], [1.0, 1.0, 1.0])
        pool = CandidatePool([[0.0], [1.0]], [[2.0]])
        assert select_if_ucr(model, pool, CostModel(1.0, 1.0)).level is LOW

    def test_low_wins_arithmetic(self):
        model = StubModel([2.0, 0.0], [0.0, 4.0])
        d = select_if_ucr(model, CandidatePool([[0.0]], [[1.0]]), CostModel(1.0, 5.0))
        assert d.level is LOW and d.score == pytest.approx(2.0)

    def test_empty_pools(self):
        pool = CandidatePool([[0.0]], [[0.0]])
        pool.consume(LOW, 0)
        pool.consume(HIGH, 0)
        with pytest.raises(ValueError):
            select_if_ucr(StubModel([1.0], [1.0]), pool, CostModel(1.0, 1.0))

    def test_equal_costs_match_max_sigma(self, rng):
        model = random_mf_model(rng, 4, 3, 2)
        pool = CandidatePool(rng.random((10, 2)), rng.random((10, 2)))
        d = select_if_ucr(model, pool, CostModel(3.0, 3.0))
        _, _, ve_l, _ = model.predict_many(pool.low)
        _, _, _, vd_h = model.predict_many(pool.high)
        best = max(np.sqrt(ve_l).max(), np.sqrt(vd_h).max())
        assert d.score * 3.0 == pytest.approx(best)


class TestMaxIFUCRBel:
    def test_no_reduction_scores_zero(self):
        # candidate already in both training sets with zero nugget: a believer there changes nothing
        eta = CondensedGP(Hyperparameters(1.0, [5.0], 0.0), TrainingSet([[0.0], [0.3]], [0.0, 1.0]))
        delta = CondensedGP(Hyperparameters(1.0, [5.0], 0.0), TrainingSet([[0.3]], [0.0]))
        model = MultiFidelityModel(eta, delta)
        s_low, s_high = if_ucr_bel_scores(model, CandidatePool([[0.3]], [[0.3]]), CostModel(1.0, 2.0))
        assert s_low[0] == pytest.approx(0.0, abs=1e-4)
        assert s_high[0] == pytest.approx(0.0, abs=1e-4)

    def test_all_equal_scores_pick_first_low(self):
        eta = CondensedGP(Hyperparameters(1.0, [1.0], 0.1), TrainingSet([[0.0], [0.1]], [0.0, 0.0]))
        delta = CondensedGP(Hyperparameters(1.0, [1.0], 0.1), TrainingSet([[0.0]], [0.0]))
        model = MultiFidelityModel(eta, delta)
        pool = CandidatePool([[50.0], [60.0]], [[70.0], [80.0]])
        d = select_if_ucr_bel(model, pool, CostModel(1.0, 1.0))
        assert d.level is LOW and d.index == 0

    def test_scores_non_negative(self, rng):
        for _ in range(20):
            model = random_mf_model(rng, 4, 3, 2)
            pool = CandidatePool(rng.random((15, 2)), rng.random((15, 2)))
            s_low, s_high = if_ucr_bel_scores(model, pool, CostModel(1.0, 4.0))
            assert np.all(s_low >= 0) and np.all(s_high >= 0)


@pytest.mark.parametrize("strategy", sorted(SELECTORS))
def test_matches_brute_force_small(strategy, rng):
    for _ in range(10):
        model = random_mf_model(rng, 3, 2, 1)
        n_low, n_high = (4, 4) if strategy == "if_ucr" else (3, 3)
        low, high = rng.random((n_low, 1)), rng.random((n_high, 1))
        d = SELECTORS[strategy](model, CandidatePool(low, high), CostModel(1.0, 3.0))
        assert (d.level.value, d.index) == brute_force_select(model, low, high, 1.0, 3.0, strategy)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(sorted(SELECTORS)), st.sampled_from([0.25, 2.0, 8.0]))
def test_uniform_cost_scaling_invariance(seed, strategy, factor):
    rng = np.random.default_rng(seed)
    model = random_mf_model(rng, 4, 3, 2)
    pool = CandidatePool(rng.random((12, 2)), rng.random((12, 2)))
    a = SELECTORS[strategy](model, pool, CostModel(1.0, 5.0))
    b = SELECTORS[strategy](model, pool, CostModel(factor, 5.0 * factor))
    assert (a.level, a.index) == (b.level, b.index)
    np.testing.assert_array_equal(a.point, b.point)


def test_selectors_skip_consumed_rows(rng):
    model = random_mf_model(rng, 4, 3, 1)
    pool = CandidatePool(rng.random((6, 1)), rng.random((6, 1)))
    for _ in range(8):
        d = select_if_ucr(model, pool, CostModel(1.0, 2.0))
        pool.consume(d.level, d.index)
    assert sum(pool.remaining()) == 4
