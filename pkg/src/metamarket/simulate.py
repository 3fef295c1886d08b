"""Exact event-driven simulation of the coupled market/price process.

Wraps the JIT kernel (:mod:`metamarket._kernel`) in chunked, resumable form:
per-state rate tables are precomputed once, the kernel fills fixed-size
buffers, and a :class:`~metamarket.trajectory.ViewBuilder` folds every chunk
into the compact views.  The full event log is kept in memory only up to
``event_cap`` events (default 1e8); longer runs keep the views and drop the
log ("compacted").  An optional sink receives each chunk as it is produced,
so the CLI can stream events to disk without holding them.

Deterministic: the event stream depends only on (seed, run index) and the
rate tables, never on chunk size, caps, or sinks.
"""

from __future__ import annotations

import numpy as np

from . import _kernel
from .coupled import CouplingParams, observable_rates
from .market import MarketParams, jump_rate_tables
from .trajectory import EventLog, Trajectory, ViewBuilder

__all__ = ["rate_tables", "simulate"]

_CHUNK = 1 << 20
DEFAULT_EVENT_CAP = 100_000_000


def rate_tables(
    params: MarketParams, coupling: CouplingParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-state rates (up, down, ring_minus, ring_plus) over eta_plus = 0..N.

    Built through the same scalar functions the contracts define
    (market_rates / observable_rates semantics), vectorized once per run.
    """
    up, down = jump_rate_tables(params)
    ring_minus = np.empty(params.N + 1)
    ring_plus = np.empty(params.N + 1)
    for k in range(params.N + 1):
        ring_minus[k], ring_plus[k] = observable_rates(k, params, coupling)
    return up, down, ring_minus, ring_plus


def simulate(
    params: MarketParams,
    coupling: CouplingParams,
    initial: tuple[int, int] = (0, -1),
    horizon: float | None = None,
    max_events: int | None = None,
    seed: int = 0,
    run_index: int = 0,
    event_cap: int = DEFAULT_EVENT_CAP,
    grid_dt: float | None = 0.01,
    sink=None,
) -> Trajectory:
    """Simulate the coupled process; exactly one of horizon / max_events.

    Parameters
    ----------
    initial : (eta_plus, x)
        State at t = 0.
    horizon : float
        Run until the next event would pass this time (the path then sits
        in its final state up to the horizon).  The state grid view is
        produced only in this mode.
    max_events : int
        Alternatively, stop after this many events; the realized horizon
        is the time of the last event.
    seed, run_index : int
        The RNG stream is a pure function of the pair, so seed sweeps and
        per-seed parallel runs are reproducible individually.
    event_cap : int
        Keep the full event log only up to this many events (0 = never
        keep it); the compact views are always complete.
    sink : callable or None
        ``sink(t, kind, eta, x)`` called once per chunk with the freshly
        generated arrays (used by the CLI to stream CSV).
    """
    if (horizon is None) == (max_events is None):
        raise ValueError("specify exactly one of horizon / max_events")
    if horizon is not None and horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {horizon}")
    if max_events is not None and max_events <= 0:
        raise ValueError(f"max_events must be positive, got {max_events}")
    k0, x0 = int(initial[0]), int(initial[1])
    if not 0 <= k0 <= params.N:
        raise ValueError(f"initial eta_plus out of range: {k0}")
    if x0 not in (-1, 1):
        raise ValueError(f"initial x must be -1 or +1, got {x0}")

    up, down, ring_minus, ring_plus = rate_tables(params, coupling)
    rng = _kernel.seed_state(np.uint64(seed), np.uint64(run_index))
    kern_horizon = -1.0 if horizon is None else float(horizon)
    budget = np.inf if max_events is None else int(max_events)

    builder = ViewBuilder(
        params,
        (k0, x0),
        grid_dt=grid_dt if horizon is not None else None,
        horizon=horizon,
    )
    buf_t = np.empty(_CHUNK, dtype=np.float64)
    buf_kind = np.empty(_CHUNK, dtype=np.int8)
    buf_eta = np.empty(_CHUNK, dtype=np.int32)
    buf_x = np.empty(_CHUNK, dtype=np.int8)
    kept: list[tuple[np.ndarray, ...]] = []
    kept_total = 0

    t, comp, k, x = 0.0, 0.0, k0, x0
    status_code = _kernel.STATUS_DONE
    n_total = 0
    while True:
        fill = int(min(_CHUNK, budget - n_total))
        if fill <= 0:
            status_code = _kernel.STATUS_CHUNK_FULL
            break
        n, t, comp, k, x, status_code = _kernel.run_chunk(
            rng, up, down, ring_minus, ring_plus, kern_horizon,
            t, comp, k, x, buf_t, buf_kind, buf_eta, buf_x, fill,
        )
        if n:
            ct = buf_t[:n].copy()
            ck = buf_kind[:n].copy()
            ce = buf_eta[:n].copy()
            cx = buf_x[:n].copy()
            builder.push(ct, ck, ce, cx)
            if sink is not None:
                sink(ct, ck, ce, cx)
            if kept_total + n <= event_cap:
                kept.append((ct, ck, ce, cx))
                kept_total += n
            else:
                kept = []
                kept_total = event_cap + 1  # poisoned: stay compacted
            n_total += n
        if status_code != _kernel.STATUS_CHUNK_FULL:
            break

    views = builder.finish()
    if status_code == _kernel.STATUS_DONE:
        status = "completed"
        realized_horizon = float(horizon)
    elif status_code == _kernel.STATUS_ABSORBED:
        status = "absorbed"
        realized_horizon = float(horizon) if horizon is not None else t
    else:
        status = "max_events"
        realized_horizon = t
    if kept_total == n_total and n_total <= event_cap:
        events = EventLog(
            t=np.concatenate([c[0] for c in kept]) if kept else np.empty(0),
            kind=np.concatenate([c[1] for c in kept]) if kept else np.empty(0, np.int8),
            eta_plus=np.concatenate([c[2] for c in kept]) if kept else np.empty(0, np.int32),
            x=np.concatenate([c[3] for c in kept]) if kept else np.empty(0, np.int8),
        )
        compacted = False
    else:
        events = None
        compacted = True
    return Trajectory(
        params=params,
        coupling=coupling,
        seed=int(seed),
        initial=(k0, x0),
        horizon=realized_horizon,
        status=status,
        final=views["final"],
        events=events,
        label_changes=views["label_changes"],
        x_changes=views["x_changes"],
        rings=views["rings"],
        grid=views["grid"],
        n_events=views["n_events"],
        n_market=views["n_market"],
        n_rings=views["n_rings"],
        ring_tally=views["ring_tally"],
        compacted=compacted,
    )
