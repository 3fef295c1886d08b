"""Trajectories and the path algebra: occupation times, trace, order path.

A trajectory is piecewise constant and right-continuous: the state on
``[t_i, t_{i+1})`` is the state *after* event ``i``.  Everything analytic
about a long run is captured by four compact views that are computed
streamingly while the events are generated and are therefore available at
any scale, even when the full event log is dropped (beyond the storage cap):

* ``label_changes`` — times where the well label of ``eta_plus`` changes;
* ``x_changes``    — times where the price direction ``x`` actually flips;
* ``rings``        — every observable ring (time, painted x, well label);
* ``grid``         — (eta_plus, cumulative price increment, label) sampled
  on a fixed time grid (horizon mode only).

The clock-surgery operations (``trace``) need the full event log and exist
for analysis-scale runs; ``order_path`` and ``occupation_report`` work from
the label timeline alone.  Inside a traced trajectory two events may share
a timestamp (the event that ended a gap lands exactly where the gap began);
event times are therefore non-decreasing, strictly increasing only for
directly simulated paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coupled import CouplingParams
from .market import MarketParams, classify_table

__all__ = [
    "EventLog",
    "GridSample",
    "Trajectory",
    "OrderPath",
    "OccupationReport",
    "PricePath",
    "trajectory_from_events",
    "occupation_time",
    "trace",
    "order_path",
    "occupation_report",
    "price_path",
]

KIND_MARKET = 0
KIND_RING = 1


@dataclass(frozen=True)
class EventLog:
    """Full event record, struct-of-arrays; entries are state *after* event."""

    t: np.ndarray  # float64
    kind: np.ndarray  # int8; 0 market jump, 1 ring
    eta_plus: np.ndarray  # int32
    x: np.ndarray  # int8

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class GridSample:
    """State sampled on a uniform time grid (includes t = 0)."""

    t: np.ndarray
    eta_plus: np.ndarray  # int32
    price_increment: np.ndarray  # int64 cumulative sum of ring steps
    label: np.ndarray  # int8


@dataclass(frozen=True)
class Trajectory:
    params: MarketParams
    coupling: CouplingParams | None
    seed: int
    initial: tuple[int, int]  # (eta_plus, x) at t = 0
    horizon: float  # wall-clock end of the path
    status: str  # "completed" | "absorbed" | "max_events"
    final: tuple[int, int]  # (eta_plus, x) at the horizon
    events: EventLog | None  # None when beyond the storage cap
    label_changes: tuple[np.ndarray, np.ndarray]  # (t, label after)
    x_changes: tuple[np.ndarray, np.ndarray]  # (t, x after)
    rings: tuple[np.ndarray, np.ndarray, np.ndarray]  # (t, x, label)
    grid: GridSample | None
    n_events: int
    n_market: int
    n_rings: int
    ring_tally: np.ndarray  # 3x2 counts: rows label -1/0/+1, cols x -1/+1
    compacted: bool = False
    monotone_strict: bool = True  # False for traced paths (shared stamps)


@dataclass(frozen=True)
class OrderPath:
    """Well-label process in the trace clock (delta time excised).

    ``t_start[i]`` is the trace-clock start of segment ``i`` with label
    ``label[i]``; consecutive labels differ.  ``total_time`` is the total
    time spent in the wells.  If the underlying path started in delta, the
    time before first well entry is excluded and recorded.
    """

    t_start: np.ndarray
    label: np.ndarray  # int8, +-1
    total_time: float
    pre_entry_discarded: float = 0.0

    def durations(self) -> np.ndarray:
        return np.diff(np.append(self.t_start, self.total_time))

    def to_csv(self) -> str:
        """Serialize as ``t_start,label`` rows (trace clock, LF endings)."""
        lines = ["t_start,label"]
        for t, lab in zip(self.t_start, self.label):
            lines.append(f"{t:.12g},{int(lab)}")
        return "\n".join(lines) + "\n"

    def __post_init__(self) -> None:
        lab = np.asarray(self.label)
        if len(lab) > 1 and np.any(lab[1:] == lab[:-1]):
            raise ValueError("consecutive order-path labels must differ")


@dataclass(frozen=True)
class OccupationReport:
    time_in_well_minus: float
    time_in_well_plus: float
    time_in_delta: float
    horizon: float


@dataclass(frozen=True)
class PricePath:
    """Price S(t) = s0 + sum of +-1 ring steps with ring time <= t."""

    s0: int
    t: np.ndarray
    increment: np.ndarray  # int8 +-1

    def values_at(self, times: np.ndarray) -> np.ndarray:
        cum = np.concatenate(([0], np.cumsum(self.increment, dtype=np.int64)))
        idx = np.searchsorted(self.t, times, side="right")
        return self.s0 + cum[idx]

    def final(self) -> int:
        return self.s0 + int(np.sum(self.increment, dtype=np.int64))


class ViewBuilder:
    """Streaming accumulator for the compact trajectory views.

    Fed chunk-by-chunk with event arrays; carries the running state across
    chunks so the views are identical whether the path arrived in one chunk
    or many.
    """

    def __init__(
        self,
        params: MarketParams,
        initial: tuple[int, int],
        grid_dt: float | None = None,
        horizon: float | None = None,
    ):
        self.params = params
        self.label_of = classify_table(params)
        self.initial = initial
        self.prev_eta = int(initial[0])
        self.prev_x = int(initial[1])
        self.prev_label = int(self.label_of[self.prev_eta])
        self.cum_price = 0
        self.n_events = 0
        self.n_rings = 0
        self.ring_tally = np.zeros((3, 2), dtype=np.int64)
        self._lc_t, self._lc_v = [], []
        self._xc_t, self._xc_v = [], []
        self._ring_t, self._ring_x, self._ring_lab = [], [], []
        self.grid_t = None
        if grid_dt is not None and horizon is not None and horizon > 0:
            n_pts = int(math.floor(horizon / grid_dt))
            self.grid_t = np.arange(n_pts + 1, dtype=np.float64) * grid_dt
            self._grid_eta = np.empty(n_pts + 1, dtype=np.int32)
            self._grid_price = np.empty(n_pts + 1, dtype=np.int64)
            self._grid_pos = 0
            self._grid_fill(0.0)  # t = 0 row

    def _grid_fill(self, up_to_t: float) -> None:
        """Fill grid rows with the *current* carried state for grid times
        <= up_to_t that are not yet filled."""
        while self._grid_pos < len(self.grid_t) and self.grid_t[self._grid_pos] <= up_to_t:
            self._grid_eta[self._grid_pos] = self.prev_eta
            self._grid_price[self._grid_pos] = self.cum_price
            self._grid_pos += 1

    def push(
        self, t: np.ndarray, kind: np.ndarray, eta: np.ndarray, x: np.ndarray
    ) -> None:
        n = len(t)
        if n == 0:
            return
        lab = self.label_of[eta]
        # well-label change points (first event compared against the carry)
        changed = np.empty(n, dtype=bool)
        changed[0] = lab[0] != self.prev_label
        np.not_equal(lab[1:], lab[:-1], out=changed[1:])
        if changed.any():
            self._lc_t.append(t[changed].copy())
            self._lc_v.append(lab[changed].copy())
        # x change points
        xch = np.empty(n, dtype=bool)
        xch[0] = x[0] != self.prev_x
        np.not_equal(x[1:], x[:-1], out=xch[1:])
        if xch.any():
            self._xc_t.append(t[xch].copy())
            self._xc_v.append(x[xch].copy())
        # rings
        is_ring = kind == KIND_RING
        n_ring = int(is_ring.sum())
        if n_ring:
            self._ring_t.append(t[is_ring].copy())
            self._ring_x.append(x[is_ring].copy())
            self._ring_lab.append(lab[is_ring].copy())
            rows = lab[is_ring].astype(np.int64) + 1
            cols = (x[is_ring].astype(np.int64) + 1) // 2
            np.add.at(self.ring_tally, (rows, cols), 1)
        # grid sampling: state at grid time tg is the state after the last
        # event with t <= tg (right-continuous)
        if self.grid_t is not None and self._grid_pos < len(self.grid_t):
            price_after = self.cum_price + np.cumsum(
                np.where(is_ring, x, 0), dtype=np.int64
            )
            hi = np.searchsorted(self.grid_t, t[-1], side="right")
            gt = self.grid_t[self._grid_pos : hi]
            if len(gt):
                idx = np.searchsorted(t, gt, side="right") - 1
                self._grid_eta[self._grid_pos : hi] = np.where(
                    idx >= 0, eta[np.maximum(idx, 0)], self.prev_eta
                )
                self._grid_price[self._grid_pos : hi] = np.where(
                    idx >= 0, price_after[np.maximum(idx, 0)], self.cum_price
                )
                self._grid_pos = hi
            self.cum_price = int(price_after[-1])
        else:
            self.cum_price += int(np.sum(np.where(is_ring, x, 0), dtype=np.int64))
        self.n_events += n
        self.n_rings += n_ring
        self.prev_eta = int(eta[-1])
        self.prev_x = int(x[-1])
        self.prev_label = int(lab[-1])

    def _gather(self, ts: list, vs: list, vdtype) -> tuple[np.ndarray, np.ndarray]:
        if not ts:
            return np.empty(0, dtype=np.float64), np.empty(0, dtype=vdtype)
        return np.concatenate(ts), np.concatenate(vs).astype(vdtype)

    def finish(self) -> dict:
        out = {
            "label_changes": self._gather(self._lc_t, self._lc_v, np.int8),
            "x_changes": self._gather(self._xc_t, self._xc_v, np.int8),
            "n_events": self.n_events,
            "n_rings": self.n_rings,
            "n_market": self.n_events - self.n_rings,
            "ring_tally": self.ring_tally,
            "final": (self.prev_eta, self.prev_x),
        }
        rt, rx = self._gather(self._ring_t, self._ring_x, np.int8)
        _, rl = self._gather(self._ring_t, self._ring_lab, np.int8)
        out["rings"] = (rt, rx, rl)
        if self.grid_t is not None:
            self._grid_fill(np.inf)  # remaining grid rows hold the final state
            out["grid"] = GridSample(
                t=self.grid_t,
                eta_plus=self._grid_eta,
                price_increment=self._grid_price,
                label=self.label_of[self._grid_eta],
            )
        else:
            out["grid"] = None
        return out


def trajectory_from_events(
    params: MarketParams,
    initial: tuple[int, int],
    horizon: float,
    t: np.ndarray,
    kind: np.ndarray,
    eta_plus: np.ndarray,
    x: np.ndarray,
    coupling: CouplingParams | None = None,
    seed: int = 0,
    status: str = "completed",
    grid_dt: float | None = None,
    _allow_equal_times: bool = False,
) -> Trajectory:
    """Assemble a Trajectory (with all views) from explicit event arrays.

    Test and tooling entry point; the simulator builds its trajectories
    through the same ViewBuilder so the two construction paths agree.
    """
    t = np.asarray(t, dtype=np.float64)
    kind = np.asarray(kind, dtype=np.int8)
    eta_arr = np.asarray(eta_plus, dtype=np.int32)
    x_arr = np.asarray(x, dtype=np.int8)
    if len(t):
        dt_ok = np.all(t[1:] > t[:-1]) if not _allow_equal_times else np.all(
            t[1:] >= t[:-1]
        )
        if not dt_ok:
            raise ValueError("event times must increase along the trajectory")
        if t[0] < 0 or t[-1] > horizon * (1 + 1e-12):
            raise ValueError("event times must lie in [0, horizon]")
    builder = ViewBuilder(params, initial, grid_dt=grid_dt, horizon=horizon)
    builder.push(t, kind, eta_arr, x_arr)
    views = builder.finish()
    return Trajectory(
        params=params,
        coupling=coupling,
        seed=seed,
        initial=(int(initial[0]), int(initial[1])),
        horizon=float(horizon),
        status=status,
        final=views["final"],
        events=EventLog(t=t, kind=kind, eta_plus=eta_arr, x=x_arr),
        label_changes=views["label_changes"],
        x_changes=views["x_changes"],
        rings=views["rings"],
        grid=views["grid"],
        n_events=views["n_events"],
        n_market=views["n_market"],
        n_rings=views["n_rings"],
        ring_tally=views["ring_tally"],
        compacted=False,
        monotone_strict=not _allow_equal_times,
    )


def _intervals(traj: Trajectory):
    """Piecewise-constant intervals (start, eta, x); interval i runs to the
    next start (last one to the horizon).  Needs the full event log."""
    if traj.events is None:
        raise ValueError(
            "operation requires the full event log, which was dropped "
            "(trajectory is compacted); use the label-timeline operations"
        )
    ev = traj.events
    starts = np.concatenate(([0.0], ev.t))
    etas = np.concatenate(([traj.initial[0]], ev.eta_plus)).astype(np.int64)
    xs = np.concatenate(([traj.initial[1]], ev.x)).astype(np.int64)
    return starts, etas, xs


def occupation_time(traj: Trajectory, subset, t: float) -> float:
    """Time in [0, t] the path spends in ``subset``.

    ``subset`` is a vectorized predicate ``(eta_plus_array, x_array) ->
    bool array`` evaluated jointly on the two coordinates.  Summation uses
    ``math.fsum`` so disjoint subsets add exactly.
    """
    if not 0 <= t <= traj.horizon * (1 + 1e-12):
        raise ValueError(f"t={t} outside [0, horizon={traj.horizon}]")
    starts, etas, xs = _intervals(traj)
    ends = np.append(starts[1:], traj.horizon)
    mask = np.asarray(subset(etas, xs), dtype=bool)
    lo = np.minimum(starts, t)
    hi = np.minimum(ends, t)
    dur = np.maximum(hi - lo, 0.0)
    return math.fsum(dur[mask])


def trace(traj: Trajectory, subset) -> Trajectory:
    """Clock surgery: excise all time outside ``subset`` and concatenate.

    The returned trajectory lives in the trace clock; its horizon is the
    total time spent in the subset.  Events whose post-state is outside the
    subset are dropped; the event re-entering the subset lands at the same
    trace time where the gap began, so traced event times may repeat.
    """
    starts, etas, xs = _intervals(traj)
    ev = traj.events
    ends = np.append(starts[1:], traj.horizon)
    dur = ends - starts
    mask = np.asarray(subset(etas, xs), dtype=bool)  # per interval
    total = math.fsum(dur[mask])
    if total <= 0.0:
        raise ValueError("path spends no time in the subset; empty trace")
    # trace-clock start of each interval = kept time strictly before it
    kept = np.where(mask, dur, 0.0)
    kept_before = np.concatenate(([0.0], np.cumsum(kept)))[:-1]
    # events to keep: post-state in subset (interval j>=1 corresponds to event j-1)
    keep_ev = mask[1:]
    new_t = kept_before[1:][keep_ev]
    new_kind = ev.kind[keep_ev]
    new_eta = ev.eta_plus[keep_ev]
    new_x = ev.x[keep_ev]
    if mask[0]:
        initial = traj.initial
    else:
        if not keep_ev.any():
            raise ValueError("path spends no time in the subset; empty trace")
        j = int(np.argmax(keep_ev))
        initial = (int(ev.eta_plus[j]), int(ev.x[j]))
        # the first kept event IS the new initial state at trace time 0;
        # drop it from the event list
        new_t = new_t[1:]
        new_kind = new_kind[1:]
        new_eta = new_eta[1:]
        new_x = new_x[1:]
    return trajectory_from_events(
        traj.params,
        initial,
        total,
        new_t,
        new_kind,
        new_eta,
        new_x,
        coupling=traj.coupling,
        seed=traj.seed,
        status=traj.status,
        _allow_equal_times=True,
    )


def _label_timeline(traj: Trajectory):
    """(starts, labels, ends) of the well-label process in the wall clock."""
    lc_t, lc_v = traj.label_changes
    initial_label = int(classify_table(traj.params)[traj.initial[0]])
    starts = np.concatenate(([0.0], lc_t))
    labels = np.concatenate(([initial_label], lc_v)).astype(np.int64)
    ends = np.append(starts[1:], traj.horizon)
    return starts, labels, ends


def order_path(traj: Trajectory, params: MarketParams | None = None) -> OrderPath:
    """Project to well labels, excise delta time, merge equal neighbors.

    Works from the label-change view, so it is available at any scale.  A
    path that starts in delta has its pre-entry time discarded (recorded in
    ``pre_entry_discarded``).  Equal labels separated only by a delta
    excursion merge into a single segment.
    """
    del params  # labels are already baked into the view; kept for symmetry
    starts, labels, ends = _label_timeline(traj)
    dur = ends - starts
    pre_entry = 0.0
    if labels[0] == 0:
        inside = np.flatnonzero(labels != 0)
        if len(inside) == 0:
            raise ValueError("path never enters a well; empty order path")
        first = inside[0]
        pre_entry = math.fsum(dur[:first])
        starts, labels, dur = starts[first:], labels[first:], dur[first:]
    keep = labels != 0
    lab_kept = labels[keep]
    dur_kept = dur[keep]
    if len(lab_kept) == 0:
        raise ValueError("path never enters a well; empty order path")
    # merge runs of equal labels (delta excursions between them vanish in
    # the trace clock)
    boundary = np.concatenate(([True], lab_kept[1:] != lab_kept[:-1]))
    seg_ids = np.cumsum(boundary) - 1
    n_seg = seg_ids[-1] + 1
    seg_dur = np.zeros(n_seg)
    np.add.at(seg_dur, seg_ids, dur_kept)
    seg_lab = lab_kept[boundary].astype(np.int8)
    seg_start = np.concatenate(([0.0], np.cumsum(seg_dur)))[:-1]
    total = math.fsum(dur_kept)
    return OrderPath(
        t_start=seg_start,
        label=seg_lab,
        total_time=total,
        pre_entry_discarded=pre_entry,
    )


def occupation_report(traj: Trajectory, params: MarketParams | None = None) -> OccupationReport:
    """Wall-clock occupation of the three regions, summing to the horizon."""
    del params
    starts, labels, ends = _label_timeline(traj)
    dur = ends - starts
    return OccupationReport(
        time_in_well_minus=math.fsum(dur[labels == -1]),
        time_in_well_plus=math.fsum(dur[labels == 1]),
        time_in_delta=math.fsum(dur[labels == 0]),
        horizon=traj.horizon,
    )


def price_path(traj: Trajectory, s0: int) -> PricePath:
    """One +-1 step per ring at its time; S(t) right-continuous."""
    rt, rx, _ = traj.rings
    return PricePath(s0=int(s0), t=rt, increment=rx)
