"""Discrete hidden-Markov engine: simulation, inference, discretization.

A hidden chain ``Y`` moves by the row-stochastic matrix ``P``; each step
emits a symbol ``X`` by the emission matrix ``Q`` depending only on the
current ``Y``.  The running sum of +-1 emissions is the discrete price.

The forward/backward/Baum-Welch recursions use per-step normalization
(scaling), accumulating the likelihood in log space, so sequences of length
1e7 neither underflow nor lose the EM monotonicity guarantee; a sequence
with zero probability under the model is reported as -inf log-likelihood
rather than raised.  Viterbi runs fully in log space; ties break toward the
lower state index.  The numerical cores are JIT-compiled.

``discretize`` bridges the continuous simulation to this engine: one symbol
per time bin, the sign of the price increment over the bin; a flat bin
repeats the previous symbol (+1 when there is none yet).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .trajectory import Trajectory

__all__ = [
    "HmmSpec",
    "HmmFit",
    "example_spec",
    "simulate_hmm",
    "accumulate",
    "forward_backward",
    "baum_welch",
    "baum_welch_restarts",
    "viterbi",
    "discretize",
    "align_by_emission",
]

_ROW_TOL = 1e-12


@dataclass(frozen=True)
class HmmSpec:
    """Hidden-Markov model parameters over labeled state sets.

    ``hidden_states`` and ``obs_states`` give the labels; ``P`` (l x l),
    ``Q`` (l x k) and ``initial`` (l) are indexed in label order.
    """

    hidden_states: tuple
    obs_states: tuple
    P: np.ndarray
    Q: np.ndarray
    initial: np.ndarray

    def __post_init__(self) -> None:
        P = np.asarray(self.P, dtype=np.float64)
        Q = np.asarray(self.Q, dtype=np.float64)
        init = np.asarray(self.initial, dtype=np.float64)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "initial", init)
        l, k = len(self.hidden_states), len(self.obs_states)
        if P.shape != (l, l) or Q.shape != (l, k) or init.shape != (l,):
            raise ValueError("matrix shapes inconsistent with state sets")
        for name, M in (("P", P), ("Q", Q)):
            if np.min(M) < 0:
                raise ValueError(f"{name} has negative entries")
            if np.max(np.abs(M.sum(axis=1) - 1.0)) > _ROW_TOL:
                raise ValueError(f"rows of {name} must sum to 1")
        if np.min(init) < 0 or abs(init.sum() - 1.0) > _ROW_TOL:
            raise ValueError("initial distribution invalid")

    def obs_index(self, obs) -> np.ndarray:
        """Map a label sequence to column indices of Q."""
        lut = {s: i for i, s in enumerate(self.obs_states)}
        try:
            return np.fromiter((lut[o] for o in obs), dtype=np.int64, count=len(obs))
        except KeyError as e:
            raise ValueError(f"unknown observation symbol {e.args[0]!r}") from None


@dataclass(frozen=True)
class HmmFit:
    estimate: HmmSpec
    log_likelihood_trace: list
    iterations: int
    converged: bool


def example_spec() -> HmmSpec:
    """Three-regime demo parameters: sticky regimes (stay 0.8) with weakly
    separated +-1 emissions (0.55 / 0.50 / 0.45 for up-moves)."""
    P = np.array(
        [
            [0.8, 0.1, 0.1],
            [0.1, 0.8, 0.1],
            [0.1, 0.1, 0.8],
        ]
    )
    # hidden labels ordered (-1, 0, +1); obs labels (-1, +1)
    Q = np.array(
        [
            [0.55, 0.45],
            [0.50, 0.50],
            [0.45, 0.55],
        ]
    )
    init = np.full(3, 1.0 / 3.0)
    return HmmSpec(hidden_states=(-1, 0, 1), obs_states=(-1, 1), P=P, Q=Q, initial=init)


def simulate_hmm(spec: HmmSpec, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample (hidden, observed) label sequences of length n."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    l = len(spec.hidden_states)
    cum_P = np.cumsum(spec.P, axis=1)
    cum_Q = np.cumsum(spec.Q, axis=1)
    hidden_idx = np.empty(n, dtype=np.int64)
    obs_idx = np.empty(n, dtype=np.int64)
    u = rng.random((n, 2))
    state = int(np.searchsorted(np.cumsum(spec.initial), u[0, 0], side="right"))
    state = min(state, l - 1)
    for t in range(n):
        if t > 0:
            state = int(np.searchsorted(cum_P[state], u[t, 0], side="right"))
            state = min(state, l - 1)
        hidden_idx[t] = state
        o = int(np.searchsorted(cum_Q[state], u[t, 1], side="right"))
        obs_idx[t] = min(o, len(spec.obs_states) - 1)
    hidden = np.asarray(spec.hidden_states)[hidden_idx]
    obs = np.asarray(spec.obs_states)[obs_idx]
    return hidden, obs


def accumulate(obs, s0: int) -> np.ndarray:
    """Running price S_n = s0 + sum of the first n +-1 symbols (S_0 included)."""
    arr = np.asarray(obs, dtype=np.int64)
    if len(arr) and not np.all(np.isin(arr, (-1, 1))):
        raise ValueError("observations must be +-1 for price accumulation")
    return s0 + np.concatenate(([0], np.cumsum(arr)))


@njit(cache=True, nogil=True)
def _forward_scaled(P, Q, init, obs):
    n = obs.shape[0]
    l = P.shape[0]
    alpha = np.zeros((n, l))
    scale = np.zeros(n)
    a = init * Q[:, obs[0]]
    s = a.sum()
    scale[0] = s
    if s > 0.0:
        alpha[0] = a / s
    loglik = -np.inf if s == 0.0 else np.log(s)
    for t in range(1, n):
        a = (alpha[t - 1] @ P) * Q[:, obs[t]]
        s = a.sum()
        scale[t] = s
        if s == 0.0:
            return alpha, scale, -np.inf
        alpha[t] = a / s
        loglik += np.log(s)
    return alpha, scale, loglik


@njit(cache=True, nogil=True)
def _backward_scaled(P, Q, obs, scale):
    n = obs.shape[0]
    l = P.shape[0]
    beta = np.zeros((n, l))
    beta[n - 1] = 1.0
    for t in range(n - 2, -1, -1):
        if scale[t + 1] == 0.0:
            return beta
        beta[t] = (P @ (Q[:, obs[t + 1]] * beta[t + 1])) / scale[t + 1]
    return beta


def forward_backward(spec: HmmSpec, obs) -> tuple[float, np.ndarray]:
    """Log-likelihood and per-step posterior state probabilities.

    A zero-probability sequence yields (-inf, zero-row posteriors past the
    breaking point) and is the caller's signal of model/data mismatch.
    """
    o = spec.obs_index(obs)
    alpha, scale, loglik = _forward_scaled(spec.P, spec.Q, spec.initial, o)
    beta = _backward_scaled(spec.P, spec.Q, o, scale)
    post = alpha * beta
    norm = post.sum(axis=1, keepdims=True)
    np.divide(post, norm, out=post, where=norm > 0)
    return float(loglik), post


@njit(cache=True, nogil=True)
def _bw_step(P, Q, init, obs):
    """One EM step; returns (loglik of current params, P', Q', init')."""
    n = obs.shape[0]
    l = P.shape[0]
    k = Q.shape[1]
    alpha, scale, loglik = _forward_scaled(P, Q, init, obs)
    newP = np.zeros((l, l))
    newQ = np.zeros((l, k))
    newinit = np.zeros(l)
    if loglik == -np.inf:
        return loglik, newP, newQ, newinit
    beta = _backward_scaled(P, Q, obs, scale)
    # gamma_t ~ alpha_t * beta_t (already normalized per step)
    for t in range(n):
        g = alpha[t] * beta[t]
        gs = g.sum()
        if gs > 0:
            g = g / gs
        newQ[:, obs[t]] += g
        if t == 0:
            newinit = g.copy()
    # xi sums: expected transition counts
    for t in range(n - 1):
        denom = scale[t + 1]
        if denom == 0.0:
            continue
        b_next = Q[:, obs[t + 1]] * beta[t + 1]
        for i in range(l):
            for j in range(l):
                newP[i, j] += alpha[t, i] * P[i, j] * b_next[j] / denom
    for i in range(l):
        rp = newP[i].sum()
        if rp > 0:
            newP[i] /= rp
        else:
            newP[i] = P[i]
        rq = newQ[i].sum()
        if rq > 0:
            newQ[i] /= rq
        else:
            newQ[i] = Q[i]
    si = newinit.sum()
    if si > 0:
        newinit /= si
    else:
        newinit = init.copy()
    return loglik, newP, newQ, newinit


def baum_welch(obs, init: HmmSpec, max_iter: int = 200, tol: float = 1e-8) -> HmmFit:
    """EM fit from an explicit starting spec; monotone log-likelihood.

    Stops when the improvement drops below ``tol`` (converged) or after
    ``max_iter`` iterations.  The trace records the likelihood of the
    parameters *before* each step plus a final evaluation, so its length is
    iterations + 1.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if np.any(init.P.sum(axis=1) == 0) or np.any(init.Q.sum(axis=1) == 0):
        raise ValueError("degenerate starting spec (zero rows)")
    o = init.obs_index(obs)
    P, Q, pi = init.P.copy(), init.Q.copy(), init.initial.copy()
    trace = []
    converged = False
    iterations = 0
    for _ in range(max_iter):
        ll, P2, Q2, pi2 = _bw_step(P, Q, pi, o)
        trace.append(float(ll))
        if ll == -np.inf:
            break
        P, Q, pi = P2, Q2, pi2
        iterations += 1
        if len(trace) >= 2 and trace[-1] - trace[-2] < tol:
            converged = True
            break
    final_ll, _, _, _ = _bw_step(P, Q, pi, o)
    trace.append(float(final_ll))
    est = HmmSpec(
        hidden_states=init.hidden_states,
        obs_states=init.obs_states,
        P=P,
        Q=Q,
        initial=pi,
    )
    return HmmFit(
        estimate=est,
        log_likelihood_trace=trace,
        iterations=iterations,
        converged=converged,
    )


def baum_welch_restarts(
    obs,
    n_hidden: int,
    obs_states: tuple,
    restarts: int,
    seed: int,
    max_iter: int = 200,
    tol: float = 1e-8,
    threads: int = 1,
) -> tuple[HmmFit, list[float]]:
    """Best-of-``restarts`` EM from random starting points.

    Starting matrices are Dirichlet(1) rows (uniform on the simplex), all
    drawn up-front from one seeded generator, so the search is reproducible
    regardless of ``threads`` (the numerical kernels drop the GIL, so
    restarts genuinely overlap).  Ties in final likelihood go to the
    earlier restart.  Returns the best fit and every restart's final
    log-likelihood.
    """
    rng = np.random.default_rng(seed)
    starts = []
    for _ in range(max(restarts, 1)):
        P = rng.dirichlet(np.ones(n_hidden), size=n_hidden)
        Q = rng.dirichlet(np.ones(len(obs_states)), size=n_hidden)
        starts.append(
            HmmSpec(
                hidden_states=tuple(range(n_hidden)),
                obs_states=tuple(obs_states),
                P=P,
                Q=Q,
                initial=np.full(n_hidden, 1.0 / n_hidden),
            )
        )

    def one(init: HmmSpec) -> HmmFit:
        return baum_welch(obs, init, max_iter=max_iter, tol=tol)

    if threads > 1 and len(starts) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=min(threads, len(starts))) as pool:
            fits = list(pool.map(one, starts))
    else:
        fits = [one(s) for s in starts]
    finals = [f.log_likelihood_trace[-1] for f in fits]
    best = fits[int(np.argmax(finals))]
    return best, finals


@njit(cache=True, nogil=True)
def _viterbi_core(logP, logQ, loginit, obs):
    n = obs.shape[0]
    l = logP.shape[0]
    v = loginit + logQ[:, obs[0]]
    ptr = np.zeros((n, l), dtype=np.int64)
    for t in range(1, n):
        v_new = np.empty(l)
        for j in range(l):
            best_i = 0
            best = v[0] + logP[0, j]
            for i in range(1, l):
                cand = v[i] + logP[i, j]
                if cand > best:  # strict: ties keep the lower index
                    best = cand
                    best_i = i
            v_new[j] = best + logQ[j, obs[t]]
            ptr[t, j] = best_i
        v = v_new
    best_j = 0
    for j in range(1, l):
        if v[j] > v[best_j]:
            best_j = j
    path = np.empty(n, dtype=np.int64)
    path[n - 1] = best_j
    for t in range(n - 2, -1, -1):
        path[t] = ptr[t + 1, path[t + 1]]
    return path


def viterbi(spec: HmmSpec, obs) -> np.ndarray:
    """Most probable hidden label path; ties resolved toward the lower
    state index at every step."""
    o = spec.obs_index(obs)
    with np.errstate(divide="ignore"):
        logP = np.log(spec.P)
        logQ = np.log(spec.Q)
        loginit = np.log(spec.initial)
    idx = _viterbi_core(logP, logQ, loginit, o)
    return np.asarray(spec.hidden_states)[idx]


def discretize(traj: Trajectory, dt: float, zero_fill: str = "carry") -> np.ndarray:
    """+-1 symbol per time bin: the sign of the price increment over
    [k dt, (k+1) dt).

    Flat bins (zero net increment) have no sign of their own; the fill rule
    is a modelling choice, so it is exposed:

    ``"carry"``
        repeat the previous symbol, +1 before the first signed bin (default)
    ``"up"`` / ``"down"``
        fill every flat bin with a fixed +1 / -1
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if traj.horizon < dt:
        raise ValueError("horizon shorter than one bin")
    if zero_fill not in ("carry", "up", "down"):
        raise ValueError(f"unknown zero_fill rule {zero_fill!r}")
    n_bins = int(np.floor(traj.horizon / dt + 1e-9))
    ring_t, ring_x, _ = traj.rings
    edges = np.arange(n_bins + 1, dtype=np.float64) * dt
    which = np.searchsorted(edges, ring_t, side="right") - 1
    ok = (which >= 0) & (which < n_bins)
    net = np.bincount(which[ok], weights=ring_x[ok].astype(np.float64), minlength=n_bins)
    symbols = np.empty(n_bins, dtype=np.int64)
    if zero_fill == "carry":
        prev = 1
        for k in range(n_bins):
            if net[k] > 0:
                prev = 1
            elif net[k] < 0:
                prev = -1
            symbols[k] = prev
    else:
        fill = 1 if zero_fill == "up" else -1
        symbols[:] = np.where(net > 0, 1, np.where(net < 0, -1, fill))
    return symbols


def align_by_emission(spec: HmmSpec, symbol=1) -> HmmSpec:
    """Permute hidden states by ascending emission probability of
    ``symbol`` — canonical order for comparing fits to ground truth."""
    col = spec.obs_states.index(symbol)
    perm = np.argsort(spec.Q[:, col], kind="stable")
    return HmmSpec(
        hidden_states=tuple(spec.hidden_states[i] for i in perm),
        obs_states=spec.obs_states,
        P=spec.P[np.ix_(perm, perm)],
        Q=spec.Q[perm],
        initial=spec.initial[perm],
    )
