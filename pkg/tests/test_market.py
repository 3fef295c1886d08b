"""Market-chain building blocks: rate function, clock, wells, stationarity."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from metamarket import (
    MarketParams,
    WellLabel,
    classify,
    classify_table,
    jump_rate_tables,
    market_rates,
    rate_g,
    rate_g_table,
    speedup_theta,
    stationary_weights,
    well_margin,
)


def make_params(N, alpha, r=0.1, ell=None):
    if ell is None:
        ell = well_margin(N, "paper")
    return MarketParams(N=N, alpha=alpha, r_minus_plus=r, r_plus_minus=r, ell=ell)


class TestRateG:
    def test_fixed_values(self):
        assert rate_g(0, 1.01) == 0.0
        assert rate_g(1, 1.01) == 1.0
        assert rate_g(2, 2.0) == 4.0
        assert rate_g(3, 2.0) == pytest.approx(2.25, abs=0)

    def test_decreasing_to_one(self):
        alpha = 1.3
        vals = [rate_g(n, alpha) for n in range(1, 200)]
        assert all(a > b for a, b in zip(vals[1:], vals[2:]))
        assert vals[-1] > 1.0
        assert vals[-1] < 1.01

    def test_table_matches_scalar(self):
        alpha = 1.7
        table = rate_g_table(12, alpha)
        assert_allclose(table, [rate_g(n, alpha) for n in range(13)], rtol=0, atol=0)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            rate_g(-1, 1.5)


class TestSpeedup:
    def test_values(self):
        assert speedup_theta(2, 2.0) == 8.0
        assert speedup_theta(1, 1.5) == 1.0

    def test_headline_clock(self):
        # N = 1e4, alpha = 1.01: about 110 million market ticks per unit time
        assert speedup_theta(10_000, 1.01) == pytest.approx(109_647_820, abs=1)


class TestWellMargin:
    def test_presets(self):
        assert well_margin(9000, "paper") == 3000
        assert well_margin(10_000, "paper") == 3333
        assert well_margin(100, "theory") == 10
        assert well_margin(101, "theory") == 11

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            well_margin(100, "wide")


class TestClassify:
    def test_examples(self):
        p = make_params(10_000, 1.01, ell=3333)
        assert classify(10_000, p) is WellLabel.PLUS
        assert classify(5000, p) is WellLabel.DELTA
        assert classify(0, p) is WellLabel.MINUS
        assert classify(3333, p) is WellLabel.MINUS
        assert classify(3334, p) is WellLabel.DELTA
        assert classify(6667, p) is WellLabel.PLUS

    def test_table_matches_scalar(self):
        p = make_params(60, 1.2)
        table = classify_table(p)
        for k in range(61):
            assert table[k] == classify(k, p).value

    def test_out_of_range(self):
        p = make_params(10, 1.5, ell=2)
        with pytest.raises(ValueError):
            market_rates(11, p)


class TestMarketRates:
    def test_boundaries_single_move(self):
        p = make_params(50, 1.2)
        g_full = rate_g(p.N, p.alpha)
        assert market_rates(p.N, p) == [(p.N - 1, pytest.approx(p.theta * 0.1 * g_full))]
        assert market_rates(0, p) == [(1, pytest.approx(p.theta * 0.1 * g_full))]

    def test_symmetric_interior_value(self):
        # N=2, alpha=2, r=0.1: theta = 8, g(1) = 1, both moves at 0.8
        p = MarketParams(N=2, alpha=2.0, r_minus_plus=0.1, r_plus_minus=0.1, ell=0)
        moves = dict(market_rates(1, p))
        assert moves[0] == pytest.approx(0.8)
        assert moves[2] == pytest.approx(0.8)

    def test_tables_match_scalar(self):
        p = MarketParams(N=25, alpha=1.4, r_minus_plus=0.2, r_plus_minus=0.05, ell=7)
        up, down = jump_rate_tables(p)
        for k in range(26):
            moves = dict(market_rates(k, p))
            assert up[k] == pytest.approx(moves.get(k + 1, 0.0), abs=1e-12)
            assert down[k] == pytest.approx(moves.get(k - 1, 0.0), abs=1e-12)


class TestStationaryWeights:
    def test_n2_exact(self):
        p = MarketParams(N=2, alpha=2.0, r_minus_plus=0.1, r_plus_minus=0.1, ell=0)
        assert_allclose(stationary_weights(p), [1 / 6, 4 / 6, 1 / 6], rtol=1e-14)

    def test_n1_uniform(self):
        p = MarketParams(N=1, alpha=1.5, r_minus_plus=0.3, r_plus_minus=0.3, ell=0)
        assert_allclose(stationary_weights(p), [0.5, 0.5], rtol=0)

    def test_symmetry_and_normalization(self):
        p = make_params(41, 1.31)
        w = stationary_weights(p)
        assert_allclose(w, w[::-1], rtol=1e-13)
        assert w.sum() == pytest.approx(1.0, abs=1e-14)

    def test_detailed_balance(self):
        # w(k) up(k) = w(k+1) down(k+1) for the symmetric chain
        p = make_params(30, 1.8)
        w = stationary_weights(p)
        up, down = jump_rate_tables(p)
        assert_allclose(w[:-1] * up[:-1], w[1:] * down[1:], rtol=1e-12)

    def test_wells_carry_the_mass(self):
        # mass concentration sharpens with alpha (polynomial tails k**-alpha)
        p_heavy = make_params(400, 2.0, ell=well_margin(400, "theory"))
        w = stationary_weights(p_heavy)
        labels = classify_table(p_heavy)
        assert w[labels != 0].sum() > 0.95
        p_soft = make_params(400, 1.01, ell=well_margin(400, "theory"))
        w_soft = stationary_weights(p_soft)
        assert w_soft[labels != 0].sum() > 0.5


class TestValidation:
    def test_bad_ell(self):
        with pytest.raises(ValueError):
            MarketParams(N=10, alpha=1.5, r_minus_plus=0.1, r_plus_minus=0.1, ell=5)
        with pytest.raises(ValueError):
            MarketParams(N=10, alpha=1.5, r_minus_plus=0.1, r_plus_minus=0.1, ell=-1)

    def test_degenerate_market(self):
        # zero-agent market: single state, no jumps, well margin forced to 0
        p = MarketParams(N=0, alpha=1.01, r_minus_plus=0.1, r_plus_minus=0.1, ell=0)
        assert p.theta == 0.0
        assert market_rates(0, p) == []
        assert_allclose(stationary_weights(p), [1.0])
        with pytest.raises(ValueError):
            MarketParams(N=0, alpha=1.01, r_minus_plus=0.1, r_plus_minus=0.1, ell=1)

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            make_params(10, 0.0, ell=2)

    def test_negative_rate(self):
        with pytest.raises(ValueError):
            MarketParams(N=10, alpha=1.5, r_minus_plus=-0.1, r_plus_minus=0.1, ell=2)

    def test_make_uses_preset(self):
        p = MarketParams.make(9000, 1.01)
        assert p.ell == 3000
        assert p.r_minus_plus == p.r_plus_minus == 0.1
