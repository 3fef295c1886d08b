"""Two-group market process: state space, jump rates, and well classification.

The market consists of N agents split between two groups labeled -1 and +1.
The state is the count ``eta_plus`` of agents in group +1 (the other group
holds ``N - eta_plus``).  An agent leaves a group of size n at rate
``g(n) = (n/(n-1))**alpha`` (``g(0) = 0``, ``g(1) = 1``), moves between the
groups according to a symmetric-or-not rate table ``r(s, r)``, and the whole
dynamics runs on the accelerated clock ``theta = N**(1 + alpha)`` so that one
unit of simulation time is one macroscopic "day".

Because ``g`` is decreasing, large groups are sticky: the process spends long
stretches near the consensus states ``eta_plus ~ 0`` and ``eta_plus ~ N``
(the wells), separated by a rarely-visited middle region (delta).  A state is
in the minus well when ``eta_plus <= ell``, in the plus well when
``eta_plus >= N - ell``; the margin ``ell`` is a free parameter with two
common presets (see :func:`well_margin`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "WellLabel",
    "MarketParams",
    "rate_g",
    "rate_g_table",
    "speedup_theta",
    "well_margin",
    "market_rates",
    "classify",
    "classify_table",
    "stationary_weights",
    "jump_rate_tables",
]


class WellLabel(enum.IntEnum):
    """Well classification of a market state; integer values -1/0/+1."""

    MINUS = -1
    DELTA = 0
    PLUS = 1


def rate_g(n: int, alpha: float) -> float:
    """Departure rate of a single agent from a group of size ``n``.

    ``g(0) = 0``, ``g(1) = 1``, ``g(n) = (n/(n-1))**alpha`` for ``n >= 2``.
    Strictly decreasing in ``n`` for ``n >= 1`` with limit 1.
    """
    if n < 0:
        raise ValueError(f"group size must be nonnegative, got {n}")
    if n == 0:
        return 0.0
    if n == 1:
        return 1.0
    return (n / (n - 1.0)) ** alpha


def rate_g_table(N: int, alpha: float) -> np.ndarray:
    """Vector ``g(0), ..., g(N)`` as a float array."""
    n = np.arange(N + 1, dtype=np.float64)
    out = np.zeros(N + 1)
    if N >= 1:
        out[1] = 1.0
    if N >= 2:
        out[2:] = (n[2:] / (n[2:] - 1.0)) ** alpha
    return out


def speedup_theta(N: int, alpha: float) -> float:
    """Clock acceleration ``N**(1 + alpha)``."""
    if N < 0:
        raise ValueError(f"N must be >= 0, got {N}")
    return float(N) ** (1.0 + alpha)


def well_margin(N: int, preset: str) -> int:
    """Well margin ``ell`` for a named preset.

    ``"paper"``: ``floor(N/3)`` — the wide wells used for the headline
    simulation (each well holds a 2/3 consensus).
    ``"theory"``: ``ceil(sqrt(N))`` — grows with N but with vanishing
    fraction ``ell/N``, as the limit theorems require.
    """
    if preset == "paper":
        return N // 3
    if preset == "theory":
        return math.isqrt(N) if math.isqrt(N) ** 2 == N else math.isqrt(N) + 1
    raise ValueError(f"unknown well preset {preset!r} (expected 'paper' or 'theory')")


@dataclass(frozen=True)
class MarketParams:
    """Immutable parameter set for the two-group market.

    Parameters
    ----------
    N : int
        Number of agents.  ``N = 0`` is the degenerate single-state market
        (useful as an oracle for the coupled chain); the interesting regime
        is large N.
    alpha : float
        Rate exponent; > 1 for the metastable regime (values in (0, 1] are
        accepted only so closed-form test oracles can be evaluated).
    r_minus_plus, r_plus_minus : float
        Jump-rate table r(-1,+1), r(+1,-1).
    ell : int
        Well margin, 0 <= ell < N/2 (``ell = 0`` makes the wells the two
        consensus points).
    theta : float
        Derived clock acceleration N**(1+alpha); computed automatically.
    """

    N: int
    alpha: float
    r_minus_plus: float
    r_plus_minus: float
    ell: int
    theta: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.N < 0:
            raise ValueError(f"N must be >= 0, got {self.N}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.r_minus_plus < 0 or self.r_plus_minus < 0:
            raise ValueError("jump rates must be nonnegative")
        if self.N == 0:
            if self.ell != 0:
                raise ValueError(f"N = 0 forces ell = 0, got ell={self.ell}")
        elif not (0 <= self.ell < self.N / 2):
            raise ValueError(
                f"well margin must satisfy 0 <= ell < N/2, got ell={self.ell}, N={self.N}"
            )
        object.__setattr__(self, "theta", speedup_theta(self.N, self.alpha))

    @classmethod
    def make(
        cls,
        N: int,
        alpha: float,
        r: float = 0.1,
        wells: str = "paper",
    ) -> "MarketParams":
        """Symmetric-rate parameters with a named well preset."""
        return cls(
            N=N,
            alpha=alpha,
            r_minus_plus=r,
            r_plus_minus=r,
            ell=well_margin(N, wells),
        )


def market_rates(eta_plus: int, params: MarketParams) -> list[tuple[int, float]]:
    """Outgoing market jumps from ``eta_plus`` as ``(target, rate)`` pairs.

    Up-jump (an agent moves from group -1 to group +1) at rate
    ``theta * r(-1,+1) * g(N - eta_plus)``; down-jump mirrored.  Zero-rate
    entries are omitted, so boundary states return a single move.
    """
    if not 0 <= eta_plus <= params.N:
        raise ValueError(f"eta_plus out of range: {eta_plus}")
    out = []
    up = params.theta * params.r_minus_plus * rate_g(params.N - eta_plus, params.alpha)
    if up > 0.0:
        out.append((eta_plus + 1, up))
    down = params.theta * params.r_plus_minus * rate_g(eta_plus, params.alpha)
    if down > 0.0:
        out.append((eta_plus - 1, down))
    return out


def jump_rate_tables(params: MarketParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-state up/down rate vectors over ``eta_plus = 0..N``.

    ``up[k]`` is the rate of ``k -> k+1`` and ``down[k]`` of ``k -> k-1``;
    ``up[N] = down[0] = 0``.  Shared by the simulation kernel and the
    generator assembly, which must agree exactly.
    """
    g = rate_g_table(params.N, params.alpha)
    up = params.theta * params.r_minus_plus * g[::-1].copy()
    down = params.theta * params.r_plus_minus * g.copy()
    up[params.N] = 0.0
    down[0] = 0.0
    return up, down


def classify(eta_plus: int, params: MarketParams) -> WellLabel:
    """Well label of a state: MINUS iff ``eta_plus <= ell``, PLUS iff
    ``eta_plus >= N - ell``, DELTA otherwise."""
    if eta_plus <= params.ell:
        return WellLabel.MINUS
    if eta_plus >= params.N - params.ell:
        return WellLabel.PLUS
    return WellLabel.DELTA


def classify_table(params: MarketParams) -> np.ndarray:
    """Labels (as int8 -1/0/+1) for every ``eta_plus`` in ``0..N``."""
    k = np.arange(params.N + 1)
    return np.where(
        k <= params.ell, -1, np.where(k >= params.N - params.ell, 1, 0)
    ).astype(np.int8)


def stationary_weights(params: MarketParams) -> np.ndarray:
    """Stationary distribution of the symmetric-rate market chain.

    The chain is a birth-death process, so detailed balance gives the
    product form ``w(k) ~ a(k) * a(N-k)`` with ``a(0) = 1`` and
    ``a(n) = n**(-alpha)`` (the telescoped product ``1/(g(1)...g(n))``).
    Returned normalized to sum 1.  Exact only for a symmetric rate table;
    callers with asymmetric rates get the same vector and must not rely
    on it (the balance property test guards the symmetric case).
    """
    k = np.arange(params.N + 1, dtype=np.float64)
    a = np.ones(params.N + 1)
    a[1:] = k[1:] ** (-params.alpha)
    w = a * a[::-1]
    return w / w.sum()
