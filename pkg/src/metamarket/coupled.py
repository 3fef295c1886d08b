"""Observable price coupling: ring rates driven by the market state.

On top of the market process runs an observable "price bell" that rings at
total rate ``delta``.  Each ring repaints the price direction ``x`` to +1
with probability ``P(eta)`` and to -1 otherwise, where ``P`` is a logistic
function of the fraction of agents in group +1:

    P(eta) = sigma(a + b * eta_plus / N),      sigma(u) = 1 / (1 + exp(-u))

with ``a <= 0 <= b``.  Two variants exist: ``LOGISTIC`` keeps the rates
positive everywhere; ``INDICATOR`` switches the bell off outside the wells
(both ring rates are zero in delta), which is the variant the resolvent
verification assumes.  Rings that repaint ``x`` to its current value are
real events — each ring contributes one +-1 step to the price path.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .market import MarketParams, WellLabel, classify

__all__ = [
    "CouplingVariant",
    "CouplingParams",
    "logistic_p",
    "observable_rates",
    "limit_rates",
]


class CouplingVariant(enum.Enum):
    LOGISTIC = "logistic"
    INDICATOR = "indicator"


@dataclass(frozen=True)
class CouplingParams:
    """Observable coupling parameters: ring rate ``delta``, logistic
    offsets ``a <= 0 <= b``, and the variant switch.

    ``delta = 0`` is accepted and simply freezes the price (no rings) —
    handy for isolating the market dynamics.
    """

    delta: float
    a: float
    b: float
    variant: CouplingVariant = CouplingVariant.LOGISTIC

    def __post_init__(self) -> None:
        if self.delta < 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")
        if self.a > 0 or self.b < 0:
            raise ValueError(f"need a <= 0 <= b, got a={self.a}, b={self.b}")
        if not isinstance(self.variant, CouplingVariant):
            object.__setattr__(self, "variant", CouplingVariant(self.variant))


def _sigma(u: float) -> float:
    # numerically symmetric logistic; avoids overflow for large |u|
    if u >= 0:
        return 1.0 / (1.0 + math.exp(-u))
    z = math.exp(u)
    return z / (1.0 + z)


def logistic_p(eta_plus: int, params: MarketParams, coupling: CouplingParams) -> float:
    """Up-tick probability ``P(eta)`` of a single ring.

    LOGISTIC: ``sigma(a + b * eta_plus / N)``.  INDICATOR: the same value
    multiplied by the indicator that the state is inside a well.  For the
    degenerate N = 0 market the consensus fraction is taken as 0.
    """
    frac = eta_plus / params.N if params.N else 0.0
    p = _sigma(coupling.a + coupling.b * frac)
    if coupling.variant is CouplingVariant.INDICATOR:
        if classify(eta_plus, params) is WellLabel.DELTA:
            return 0.0
    return p


def observable_rates(
    eta_plus: int, params: MarketParams, coupling: CouplingParams
) -> tuple[float, float]:
    """Ring rates ``(rate to x=-1, rate to x=+1)`` at a market state.

    LOGISTIC: ``(delta * (1 - P), delta * P)`` summing to ``delta``.
    INDICATOR: both components additionally carry the well indicator, so
    they sum to ``delta`` inside the wells and vanish in delta.
    """
    p = logistic_p(eta_plus, params, coupling)
    lo, hi = coupling.delta * (1.0 - p), coupling.delta * p
    if coupling.variant is CouplingVariant.INDICATOR:
        if classify(eta_plus, params) is WellLabel.DELTA:
            return 0.0, 0.0
    return lo, hi


def limit_rates(well: int, coupling: CouplingParams) -> tuple[float, float]:
    """Limiting ring rates deep inside a well as N grows.

    In the plus well ``eta_plus / N -> 1`` so ``P -> sigma(a + b)``; in the
    minus well ``P -> sigma(a)``.  Returns ``(delta * (1 - P), delta * P)``.
    """
    if well == 1:
        p = _sigma(coupling.a + coupling.b)
    elif well == -1:
        p = _sigma(coupling.a)
    else:
        raise ValueError(f"well must be -1 or +1, got {well}")
    return coupling.delta * (1.0 - p), coupling.delta * p
