"""Plain-text run configuration: ``key = value`` lines, ``#`` comments.

The format is deliberately flat — no sections, no nesting, one key per
line — so configs diff cleanly and can be written by hand or by any
language.  ``parse_config(serialize_config(cfg))`` is the identity, and
unknown or duplicated keys are rejected with the offending line number.

Recognized keys (defaults reproduce the headline simulation setup)::

    n              = 10000        # agents
    alpha          = 1.01         # zero-range exponent (> 1)
    r_minus_plus   = 0.1          # mean-field rate - -> +
    r_plus_minus   = 0.1          # mean-field rate + -> -
    wells          = paper        # well-margin preset: paper | theory
    ell            =              # optional explicit margin override
    delta          = 5.0          # observable event rate
    a              = -0.1000835   # logistic intercept
    b              = 0.2001669    # logistic slope
    variant        = logistic     # coupling: logistic | indicator
    s0             = 0            # initial price
    horizon        = 455.0        # run length in days (xor max_events)
    max_events     =              # alternative stop: total event count
    grid_dt        = 0.01         # state-grid sampling step (horizon mode)
    event_cap      = 100000000    # retain full event log up to this count
    seed           = 1
    cv_low         = 0.8          # sojourn CV acceptance band
    cv_high        = 1.2
    ks_bound       = 0.15         # KS distance bound vs exponential
    delta_fraction = 0.1          # max tolerated 0-label time fraction
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .coupled import CouplingParams, CouplingVariant
from .market import MarketParams, well_margin

__all__ = ["RunConfig", "ConfigError", "parse_config", "serialize_config"]


class ConfigError(ValueError):
    """Malformed configuration; ``line`` is 1-based (0 for whole-file)."""

    def __init__(self, message: str, line: int = 0) -> None:
        prefix = f"line {line}: " if line else ""
        super().__init__(prefix + message)
        self.line = line


@dataclass(frozen=True)
class RunConfig:
    n: int = 10000
    alpha: float = 1.01
    r_minus_plus: float = 0.1
    r_plus_minus: float = 0.1
    wells: str = "paper"
    ell: int | None = None
    delta: float = 5.0
    a: float = -0.1000835
    b: float = 0.2001669
    variant: str = "logistic"
    s0: int = 0
    horizon: float | None = 455.0
    max_events: int | None = None
    grid_dt: float = 0.01
    event_cap: int = 100_000_000
    seed: int = 1
    cv_low: float = 0.8
    cv_high: float = 1.2
    ks_bound: float = 0.15
    delta_fraction: float = 0.1

    def __post_init__(self) -> None:
        if (self.horizon is None) == (self.max_events is None):
            raise ConfigError("exactly one of horizon / max_events must be set")
        if self.wells not in ("paper", "theory"):
            raise ConfigError(f"wells must be 'paper' or 'theory', got {self.wells!r}")
        if self.variant not in ("logistic", "indicator"):
            raise ConfigError(
                f"variant must be 'logistic' or 'indicator', got {self.variant!r}"
            )

    def market_params(self) -> MarketParams:
        ell = well_margin(self.n, self.wells) if self.ell is None else self.ell
        return MarketParams(
            N=self.n,
            alpha=self.alpha,
            r_minus_plus=self.r_minus_plus,
            r_plus_minus=self.r_plus_minus,
            ell=ell,
        )

    def coupling_params(self) -> CouplingParams:
        variant = (
            CouplingVariant.LOGISTIC
            if self.variant == "logistic"
            else CouplingVariant.INDICATOR
        )
        return CouplingParams(delta=self.delta, a=self.a, b=self.b, variant=variant)


_INT_KEYS = {"n", "ell", "s0", "max_events", "event_cap", "seed"}
_FLOAT_KEYS = {
    "alpha",
    "r_minus_plus",
    "r_plus_minus",
    "delta",
    "a",
    "b",
    "horizon",
    "grid_dt",
    "cv_low",
    "cv_high",
    "ks_bound",
    "delta_fraction",
}
_STR_KEYS = {"wells", "variant"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS
# the optional pair: setting one in a file clears the other's default
_XOR_KEYS = ("horizon", "max_events")


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` text into a RunConfig.

    Raises ConfigError (with line number) on unknown keys, duplicates,
    missing '=', or unconvertible values.
    """
    seen: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        if value == "":
            raise ConfigError(f"empty value for {key!r}", lineno)
        try:
            if key in _INT_KEYS:
                seen[key] = int(value)
            elif key in _FLOAT_KEYS:
                seen[key] = float(value)
            else:
                seen[key] = value
        except ValueError:
            raise ConfigError(f"bad value {value!r} for {key!r}", lineno) from None
    if "horizon" in seen and "max_events" not in seen:
        seen["max_events"] = None
    if "max_events" in seen and "horizon" not in seen:
        seen["horizon"] = None
    try:
        return RunConfig(**seen)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse_config inverts it exactly."""
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        lines.append(f"{f.name} = {_fmt(value)}")
    return "\n".join(lines) + "\n"
