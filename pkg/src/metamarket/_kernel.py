"""JIT event loop for the coupled market/price simulation.

Exact continuous-time simulation: in state ``(k, x)`` (``k = eta_plus``) the
total exit rate is ``lam = up[k] + down[k] + ring_minus[k] + ring_plus[k]``;
the holding time is exponential(lam) and the event type is chosen
proportionally to the four rates.  The four per-state rate tables are
precomputed by the caller, so the kernel itself is model-agnostic.

Randomness contract (fixed; bit-stability across platforms and chunk sizes):

* generator: xoshiro256++ (public-domain reference algorithm), one stream
  per trajectory;
* stream seeding: the four state words are splitmix64-style avalanches of
  ``mix(seed + index * GOLDEN) + j * GOLDEN`` for ``j = 1..4``, giving
  independent random-access streams for (master seed, run index) pairs;
* exactly two draws per event, in order: holding time first (mapped to
  (0, 1] via ``((r >> 11) + 1) * 2**-53`` so the log is finite), then event
  selection (mapped to [0, 1));
* a holding-time draw that overshoots the horizon is still consumed.

Event times accumulate through Kahan compensated summation: ten billion
increments of order 1e-8 would otherwise drift by whole seconds.

The kernel fills caller-provided chunk buffers and returns a resumable
cursor ``(t, compensation, k, x)`` plus the RNG state array it mutated, so
arbitrarily long trajectories run in bounded memory.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = [
    "seed_state",
    "run_chunk",
    "STATUS_DONE",
    "STATUS_ABSORBED",
    "STATUS_CHUNK_FULL",
]

# chunk exit conditions
STATUS_DONE = 0  # next event would cross the horizon
STATUS_ABSORBED = 1  # total exit rate hit zero
STATUS_CHUNK_FULL = 2  # buffers full; resume with the returned cursor

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX_1 = _U64(0xBF58476D1CE4E5B9)
_MIX_2 = _U64(0x94D049BB133111EB)
_INV_2_53 = 1.1102230246251565e-16  # 2**-53


@njit(cache=True, inline="always")
def _mix64(w):
    w = (w ^ (w >> _U64(30))) * _MIX_1
    w = (w ^ (w >> _U64(27))) * _MIX_2
    return w ^ (w >> _U64(31))


@njit(cache=True)
def seed_state(seed, index):
    """Four xoshiro256++ state words for trajectory ``index`` under ``seed``."""
    base = _mix64(_U64(seed) + _U64(index) * _GOLDEN)
    s = np.empty(4, dtype=np.uint64)
    for j in range(4):
        s[j] = _mix64(base + _U64(j + 1) * _GOLDEN)
    return s


@njit(cache=True, inline="always")
def _rotl(v, k):
    return _U64((v << _U64(k)) | (v >> _U64(64 - k)))


@njit(cache=True, inline="always")
def _next_u64(s):
    out = _rotl(s[0] + s[3], 23) + s[0]
    t = s[1] << _U64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return out


@njit(cache=True, nogil=True)
def run_chunk(
    s,  # uint64[4] RNG state, mutated in place
    up,  # float64[N+1] rate of k -> k+1
    down,  # float64[N+1] rate of k -> k-1
    ring_minus,  # float64[N+1] rate of a ring setting x = -1
    ring_plus,  # float64[N+1] rate of a ring setting x = +1
    horizon,  # stop time; negative = unbounded (event-budget mode)
    t0,
    comp0,  # Kahan carry for t0
    k0,
    x0,
    out_t,  # float64[chunk]
    out_kind,  # int8[chunk]: 0 market jump, 1 ring
    out_eta,  # int32[chunk]: eta_plus after the event
    out_x,  # int8[chunk]: x after the event
    max_fill,
):
    """Generate up to ``max_fill`` events; returns (n, t, comp, k, x, status)."""
    t = t0
    comp = comp0
    k = k0
    x = x0
    n = 0
    status = STATUS_CHUNK_FULL
    while n < max_fill:
        uk = up[k]
        dk = down[k]
        mk = ring_minus[k]
        pk = ring_plus[k]
        lam = uk + dk + mk + pk
        if lam == 0.0:
            status = STATUS_ABSORBED
            break
        r1 = _next_u64(s)
        u1 = np.float64((r1 >> _U64(11)) + _U64(1)) * _INV_2_53
        tau = -np.log(u1) / lam
        y = tau - comp
        t_new = t + y
        if horizon >= 0.0 and t_new > horizon:
            status = STATUS_DONE
            break
        comp = (t_new - t) - y
        t = t_new
        r2 = _next_u64(s)
        thr = np.float64(r2 >> _U64(11)) * _INV_2_53 * lam
        if thr < uk:
            k += 1
            kind = 0
        elif thr < uk + dk:
            k -= 1
            kind = 0
        elif thr < uk + dk + mk:
            x = -1
            kind = 1
        else:
            x = 1
            kind = 1
        out_t[n] = t
        out_kind[n] = kind
        out_eta[n] = k
        out_x[n] = x
        n += 1
    return n, t, comp, k, x, status
