"""Path views and the trace/order-path algebra.

Most cases here are small hand-built event lists where every view can be
checked against arithmetic done on paper.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from metamarket import (
    MarketParams,
    occupation_report,
    occupation_time,
    order_path,
    price_path,
    trace,
    trajectory_from_events,
)

KIND_MARKET = 0
KIND_RING = 1


def params(N=6, alpha=1.5, ell=1):
    return MarketParams(N=N, alpha=alpha, r_minus_plus=0.1, r_plus_minus=0.1, ell=ell)


def build(events, initial=(0, -1), horizon=10.0, p=None, grid_dt=None):
    """events: list of (t, kind, eta_plus, x) tuples."""
    p = p or params()
    if events:
        t, kind, eta, x = map(np.asarray, zip(*events))
    else:
        t = kind = eta = x = np.empty(0)
    return trajectory_from_events(p, initial, horizon, t, kind, eta, x, grid_dt=grid_dt)


class TestViews:
    def test_counts_and_final(self):
        traj = build(
            [
                (1.0, KIND_MARKET, 1, -1),
                (2.0, KIND_RING, 1, 1),
                (3.0, KIND_MARKET, 2, 1),
                (4.0, KIND_RING, 2, 1),
            ]
        )
        assert traj.n_events == 4
        assert traj.n_market == 2
        assert traj.n_rings == 2
        assert traj.final == (2, 1)

    def test_label_changes_only_at_boundaries(self):
        # N=6, ell=1: minus = {0,1}, delta = {2,3,4}, plus = {5,6}
        path = [(float(i + 1), KIND_MARKET, i + 1, -1) for i in range(6)]
        traj = build(path)
        t, lab = traj.label_changes
        assert_allclose(t, [2.0, 5.0])
        assert list(lab) == [0, 1]

    def test_rings_view_carries_label(self):
        traj = build(
            [
                (1.0, KIND_RING, 0, 1),
                (2.0, KIND_MARKET, 1, 1),
                (2.5, KIND_MARKET, 2, 1),
                (3.0, KIND_RING, 2, -1),
            ]
        )
        rt, rx, rlab = traj.rings
        assert_allclose(rt, [1.0, 3.0])
        assert list(rx) == [1, -1]
        assert list(rlab) == [-1, 0]

    def test_ring_tally_by_region(self):
        traj = build(
            [
                (1.0, KIND_RING, 0, 1),
                (2.0, KIND_RING, 0, 1),
                (3.0, KIND_RING, 0, -1),
                (4.0, KIND_MARKET, 1, -1),
                (5.0, KIND_RING, 1, -1),
            ]
        )
        # rows: label -1, 0, +1; cols: x = -1, +1
        assert traj.ring_tally.tolist() == [[2, 2], [0, 0], [0, 0]]

    def test_grid_sampling(self):
        traj = build(
            [(0.6, KIND_MARKET, 1, -1), (1.4, KIND_RING, 1, 1)],
            horizon=2.0,
            grid_dt=0.5,
        )
        g = traj.grid
        assert_allclose(g.t, [0.0, 0.5, 1.0, 1.5, 2.0])
        assert list(g.eta_plus) == [0, 0, 1, 1, 1]
        assert list(g.price_increment) == [0, 0, 0, 1, 1]

    def test_monotonicity_enforced(self):
        with pytest.raises(ValueError):
            build([(2.0, KIND_MARKET, 1, -1), (1.0, KIND_MARKET, 2, -1)])

    def test_event_beyond_horizon_rejected(self):
        with pytest.raises(ValueError):
            build([(11.0, KIND_MARKET, 1, -1)])


class TestOccupationTime:
    def test_everything_gives_t(self):
        traj = build([(1.0, KIND_MARKET, 1, -1)], horizon=3.0)
        for t in (0.0, 1.7, 3.0):
            assert occupation_time(traj, lambda e, x: np.ones_like(e, bool), t) == t

    def test_empty_subset_gives_zero(self):
        traj = build([(1.0, KIND_MARKET, 1, -1)], horizon=3.0)
        assert occupation_time(traj, lambda e, x: np.zeros_like(e, bool), 3.0) == 0.0

    def test_single_state_window(self):
        # path: eta 0 on [0,1), 1 on [1,2), 0 on [2,3); time at eta=0 in [0,3) is 2
        traj = build(
            [(1.0, KIND_MARKET, 1, -1), (2.0, KIND_MARKET, 0, -1)], horizon=3.0
        )
        assert occupation_time(traj, lambda e, x: e == 0, 3.0) == pytest.approx(2.0)
        assert occupation_time(traj, lambda e, x: e == 0, 1.0) == pytest.approx(1.0)
        assert occupation_time(traj, lambda e, x: e == 1, 1.5) == pytest.approx(0.5)

    def test_complementary_subsets_add_to_t(self):
        traj = build(
            [(0.3, KIND_MARKET, 1, -1), (1.1, KIND_RING, 1, 1), (2.2, KIND_MARKET, 2, 1)],
            horizon=4.0,
        )
        for t in (0.2, 1.0, 3.3, 4.0):
            a = occupation_time(traj, lambda e, x: e % 2 == 0, t)
            b = occupation_time(traj, lambda e, x: e % 2 == 1, t)
            assert a + b == pytest.approx(t, abs=1e-12)

    def test_report_sums_to_horizon(self):
        traj = build(
            [(1.0, KIND_MARKET, 1, -1), (2.5, KIND_MARKET, 2, -1), (4.0, KIND_MARKET, 3, -1)],
            horizon=5.0,
        )
        rep = occupation_report(traj)
        total = rep.time_in_well_minus + rep.time_in_well_plus + rep.time_in_delta
        assert total == pytest.approx(rep.horizon, abs=1e-12)
        assert rep.time_in_well_minus == pytest.approx(2.5)
        assert rep.time_in_delta == pytest.approx(2.5)


class TestTrace:
    def test_identity_on_full_subset(self):
        traj = build(
            [(1.0, KIND_MARKET, 1, -1), (2.0, KIND_RING, 1, 1)], horizon=4.0
        )
        tr = trace(traj, lambda e, x: np.ones_like(e, bool))
        assert tr.horizon == pytest.approx(4.0)
        assert tr.n_events == traj.n_events
        assert_allclose(tr.events.t, traj.events.t)
        assert tr.initial == traj.initial

    def test_two_segment_surgery(self):
        # keep eta != 1; the path visits 0 on [0,1), 1 on [1,2), 0 on [2,3).
        # trace horizon 2; the re-entry event lands at trace time 1.
        traj = build(
            [(1.0, KIND_MARKET, 1, -1), (2.0, KIND_MARKET, 0, -1)], horizon=3.0
        )
        tr = trace(traj, lambda e, x: e != 1)
        assert tr.horizon == pytest.approx(2.0)
        assert_allclose(tr.events.t, [1.0])
        assert list(tr.events.eta_plus) == [0]
        assert tr.final == (0, -1)

    def test_trace_plus_excised_equals_horizon(self):
        traj = build(
            [
                (0.5, KIND_MARKET, 1, -1),
                (1.25, KIND_MARKET, 2, -1),
                (2.0, KIND_MARKET, 1, -1),
                (3.5, KIND_MARKET, 0, -1),
            ],
            horizon=6.0,
        )
        inside = trace(traj, lambda e, x: e <= 1)
        excised = occupation_time(traj, lambda e, x: e > 1, traj.horizon)
        assert inside.horizon + excised == pytest.approx(traj.horizon, abs=1e-12)

    def test_initial_outside_subset(self):
        # start at eta=0 outside subset {eta >= 1}: the first kept event
        # becomes the initial state of the traced path
        traj = build(
            [(1.0, KIND_MARKET, 1, -1), (3.0, KIND_MARKET, 2, -1)], horizon=4.0
        )
        tr = trace(traj, lambda e, x: e >= 1)
        assert tr.initial == (1, -1)
        assert tr.horizon == pytest.approx(3.0)
        assert_allclose(tr.events.t, [2.0])

    def test_empty_trace_raises(self):
        traj = build([(1.0, KIND_MARKET, 1, -1)], horizon=2.0)
        with pytest.raises(ValueError):
            trace(traj, lambda e, x: e > 5)

    def test_idempotent(self):
        traj = build(
            [
                (0.5, KIND_MARKET, 1, -1),
                (1.0, KIND_RING, 1, 1),
                (2.0, KIND_MARKET, 2, 1),
                (3.0, KIND_MARKET, 1, 1),
            ],
            horizon=5.0,
        )
        subset = lambda e, x: e <= 1
        once = trace(traj, subset)
        twice = trace(once, subset)
        assert twice.horizon == pytest.approx(once.horizon)
        assert_allclose(twice.events.t, once.events.t)
        assert list(twice.events.eta_plus) == list(once.events.eta_plus)


class TestOrderPath:
    def test_confined_path_single_segment(self):
        traj = build([(1.0, KIND_MARKET, 1, -1)], horizon=3.0)  # stays in minus
        op = order_path(traj)
        assert list(op.label) == [-1]
        assert_allclose(op.t_start, [0.0])
        assert op.total_time == pytest.approx(3.0)

    def test_delta_excursion_merges(self):
        # minus -> delta -> minus: one merged minus segment in the trace clock
        traj = build(
            [(1.0, KIND_MARKET, 2, -1), (2.0, KIND_MARKET, 1, -1)], horizon=3.0
        )
        op = order_path(traj)
        assert list(op.label) == [-1]
        assert op.total_time == pytest.approx(2.0)

    def test_well_to_well(self):
        # N=6, ell=1: 0 (minus) -> 3 (delta) -> 6 (plus)
        traj = build(
            [(1.0, KIND_MARKET, 3, -1), (2.0, KIND_MARKET, 6, -1)], horizon=4.0
        )
        op = order_path(traj)
        assert list(op.label) == [-1, 1]
        assert_allclose(op.t_start, [0.0, 1.0])
        assert op.total_time == pytest.approx(3.0)
        assert_allclose(op.durations(), [1.0, 2.0])

    def test_pre_entry_discarded(self):
        traj = build(
            [(1.5, KIND_MARKET, 1, -1)], initial=(3, -1), horizon=4.0
        )
        op = order_path(traj)
        assert op.pre_entry_discarded == pytest.approx(1.5)
        assert list(op.label) == [-1]
        assert op.total_time == pytest.approx(2.5)

    def test_never_in_wells_raises(self):
        traj = build([], initial=(3, -1), horizon=2.0)
        with pytest.raises(ValueError):
            order_path(traj)

    def test_csv_export(self):
        traj = build(
            [(1.0, KIND_MARKET, 3, -1), (2.0, KIND_MARKET, 6, -1)], horizon=4.0
        )
        text = order_path(traj).to_csv()
        assert text == "t_start,label\n0,-1\n1,1\n"

    def test_matches_trace_of_wells(self):
        # the order path IS the label process of the path traced on the wells
        traj = build(
            [
                (0.5, KIND_MARKET, 3, -1),
                (1.5, KIND_MARKET, 6, -1),
                (2.0, KIND_MARKET, 4, -1),
                (3.0, KIND_MARKET, 1, -1),
            ],
            horizon=5.0,
        )
        op = order_path(traj)
        wells_only = trace(traj, lambda e, x: (e <= 1) | (e >= 5))
        op2 = order_path(wells_only)
        assert list(op.label) == list(op2.label)
        assert_allclose(op.t_start, op2.t_start)
        assert op.total_time == pytest.approx(op2.total_time)


class TestPricePath:
    def test_steps_and_lookup(self):
        traj = build(
            [(1.0, KIND_RING, 0, 1), (2.0, KIND_RING, 0, -1)], horizon=3.0
        )
        pp = price_path(traj, 100)
        assert pp.values_at(np.array([0.5, 1.5, 2.0, 2.5])).tolist() == [100, 101, 100, 100]
        assert pp.final() == 100

    def test_right_continuity(self):
        traj = build([(1.0, KIND_RING, 0, 1)], horizon=2.0)
        pp = price_path(traj, 0)
        assert pp.values_at(np.array([1.0]))[0] == 1

    def test_market_jumps_do_not_move_price(self):
        traj = build(
            [(0.5, KIND_MARKET, 1, -1), (1.0, KIND_RING, 1, 1), (1.5, KIND_MARKET, 2, 1)],
            horizon=2.0,
        )
        assert price_path(traj, 7).final() == 8
