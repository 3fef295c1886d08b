"""Statistical checks that a simulated path behaves metastably.

Two empirical conditions are tested.  The occupation condition: the
fraction of wall-clock time outside the wells should be negligible (and
shrink along an N ladder).  The switching condition: trace-clock sojourns
in each well should look exponential (coefficient of variation near 1,
small KS distance against the fitted exponential), with empirical switching
rates compatible with the reduced two-state chain.

Censoring conventions: the final sojourn of a path is always incomplete and
is dropped; the first is dropped only when the path started outside the
wells (its start is then not a well entry).  Rates are the transition-count
over completed-sojourn-time MLE with Poisson standard errors rate/sqrt(n);
with two wells every completed sojourn in s ends with a transition to the
other well, so counts and completed durations line up exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .resolvent import ReducedChain, reduced_chain
from .trajectory import OrderPath, Trajectory, occupation_report, order_path

__all__ = [
    "SojournSample",
    "ExponentialityResult",
    "RateEstimate",
    "MetastabilityReport",
    "sojourns",
    "exponentiality",
    "empirical_rates",
    "metastability_report",
]

MIN_SOJOURNS_FOR_VERDICT = 30
CV_BAND = (0.8, 1.2)
KS_BOUND = 0.15
DELTA_FRACTION_DEFAULT = 0.1


@dataclass(frozen=True)
class SojournSample:
    """Completed trace-clock sojourn durations in one well."""

    well: int
    durations: np.ndarray

    def __post_init__(self) -> None:
        if len(self.durations) and np.min(self.durations) <= 0:
            raise ValueError("sojourn durations must be positive")


@dataclass(frozen=True)
class ExponentialityResult:
    cv: float
    ks: float
    n: int
    mean: float
    verdict: str  # "pass" | "fail" | "insufficient"


@dataclass(frozen=True)
class RateEstimate:
    rate: float
    se: float
    count: int
    total_time: float


@dataclass(frozen=True)
class MetastabilityReport:
    per_well: dict
    rates: dict
    theory: ReducedChain
    delta_fraction: float
    delta_threshold: float
    verdict_occupation: str  # "pass" | "fail"
    verdict_switching: str  # "pass" | "fail" | "insufficient"

    def to_dict(self) -> dict:
        return {
            "per_well": {
                str(w): {
                    "count": r.n,
                    "mean": r.mean,
                    "cv": r.cv,
                    "ks": r.ks,
                    "verdict": r.verdict,
                }
                for w, r in self.per_well.items()
            },
            "rates": {
                k: {"rate": v.rate, "se": v.se, "count": v.count, "time": v.total_time}
                for k, v in self.rates.items()
            },
            "theory": {
                "minus_to_plus": self.theory.rate_minus_to_plus,
                "plus_to_minus": self.theory.rate_plus_to_minus,
            },
            "delta_fraction": self.delta_fraction,
            "delta_threshold": self.delta_threshold,
            "verdicts": {
                "occupation": self.verdict_occupation,
                "switching": self.verdict_switching,
            },
        }


def sojourns(order: OrderPath) -> dict[int, SojournSample]:
    """Completed sojourn durations grouped by well label.

    The final (censored) segment never counts; the first segment is
    additionally dropped when the path entered the wells only after a
    pre-entry stretch outside them.
    """
    durations = order.durations()
    labels = np.asarray(order.label)
    start = 1 if order.pre_entry_discarded > 0.0 else 0
    completed = slice(start, len(labels) - 1)  # drop censored tail
    labs = labels[completed]
    durs = durations[completed]
    return {
        w: SojournSample(well=w, durations=durs[labs == w].copy()) for w in (-1, 1)
    }


def _ks_exponential(sample: np.ndarray, mean: float) -> float:
    """KS distance of the sample against Exponential(mean)."""
    x = np.sort(sample)
    n = len(x)
    cdf = 1.0 - np.exp(-x / mean)
    upper = np.max(np.arange(1, n + 1) / n - cdf)
    lower = np.max(cdf - np.arange(0, n) / n)
    return float(max(upper, lower))


def exponentiality(
    sample: SojournSample,
    cv_band: tuple[float, float] = CV_BAND,
    ks_bound: float = KS_BOUND,
) -> ExponentialityResult:
    """Coefficient of variation and KS distance against the fitted
    exponential; a verdict only with >= 30 completed sojourns."""
    d = sample.durations
    n = len(d)
    if n == 0:
        raise ValueError("empty sojourn sample")
    mean = float(np.mean(d))
    cv = float(np.std(d, ddof=1) / mean) if n > 1 else 0.0
    ks = _ks_exponential(d, mean)
    if n < MIN_SOJOURNS_FOR_VERDICT:
        verdict = "insufficient"
    elif cv_band[0] <= cv <= cv_band[1] and ks < ks_bound:
        verdict = "pass"
    else:
        verdict = "fail"
    return ExponentialityResult(cv=cv, ks=ks, n=n, mean=mean, verdict=verdict)


def empirical_rates(order: OrderPath) -> dict[str, RateEstimate]:
    """Maximum-likelihood two-state rates from an order path.

    rate(s -> r) = (# completed sojourns in s) / (their total duration),
    with standard error rate/sqrt(count).  Directions without a completed
    sojourn get rate nan (reported, never raised).
    """
    samples = sojourns(order)
    out = {}
    for w, key in ((-1, "minus_to_plus"), (1, "plus_to_minus")):
        d = samples[w].durations
        n = len(d)
        if n == 0:
            out[key] = RateEstimate(rate=float("nan"), se=float("nan"), count=0, total_time=0.0)
        else:
            total = math.fsum(d.tolist())
            rate = n / total
            out[key] = RateEstimate(rate=rate, se=rate / math.sqrt(n), count=n, total_time=total)
    return out


def metastability_report(
    traj: Trajectory,
    chain: ReducedChain | None = None,
    delta_threshold: float = DELTA_FRACTION_DEFAULT,
    cv_band: tuple[float, float] = CV_BAND,
    ks_bound: float = KS_BOUND,
) -> MetastabilityReport:
    """Assemble occupation + switching diagnostics for one trajectory.

    The switching verdict is "pass" when both wells pass exponentiality and
    both empirical rates lie within 3 standard errors of the reduced-chain
    rates; "insufficient" when either well has too few completed sojourns
    for a verdict.
    """
    p = traj.params
    if chain is None:
        chain = reduced_chain(p.alpha, p.r_minus_plus, p.r_plus_minus)
    occ = occupation_report(traj)
    delta_fraction = occ.time_in_delta / occ.horizon if occ.horizon > 0 else 0.0
    order = order_path(traj)
    per_well = {}
    samples = sojourns(order)
    for w in (-1, 1):
        if len(samples[w].durations) == 0:
            per_well[w] = ExponentialityResult(
                cv=float("nan"), ks=float("nan"), n=0, mean=float("nan"), verdict="insufficient"
            )
        else:
            per_well[w] = exponentiality(samples[w], cv_band=cv_band, ks_bound=ks_bound)
    rates = empirical_rates(order)
    theory_by_key = {
        "minus_to_plus": chain.rate_minus_to_plus,
        "plus_to_minus": chain.rate_plus_to_minus,
    }
    if any(r.verdict == "insufficient" for r in per_well.values()):
        switching = "insufficient"
    else:
        expo_ok = all(r.verdict == "pass" for r in per_well.values())
        rates_ok = all(
            est.count > 0 and abs(est.rate - theory_by_key[key]) <= 3.0 * est.se
            for key, est in rates.items()
        )
        switching = "pass" if (expo_ok and rates_ok) else "fail"
    return MetastabilityReport(
        per_well=per_well,
        rates=rates,
        theory=chain,
        delta_fraction=delta_fraction,
        delta_threshold=delta_threshold,
        verdict_occupation=(
            "insufficient"
            if occ.horizon <= 0
            else ("pass" if delta_fraction < delta_threshold else "fail")
        ),
        verdict_switching=switching,
    )
