"""metamarket: metastable market simulation and verification toolkit.

A two-group agent market whose group sizes follow a sticky zero-range
dynamic, coupled to a price that random-walks with a drift set by the
current majority.  The package simulates the joint process exactly,
verifies its two-state reduction numerically through resolvent equations,
runs metastability diagnostics on simulated paths, and fits discrete
hidden-Markov models to the resulting price symbols.
"""

from .market import (
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
from .coupled import (
    CouplingParams,
    CouplingVariant,
    limit_rates,
    logistic_p,
    observable_rates,
)
from .trajectory import (
    EventLog,
    OccupationReport,
    OrderPath,
    PricePath,
    Trajectory,
    occupation_report,
    occupation_time,
    order_path,
    price_path,
    trace,
    trajectory_from_events,
)
from .simulate import DEFAULT_EVENT_CAP, rate_tables, simulate
from .resolvent import (
    ReducedChain,
    ResolventSolution,
    SparseGenerator,
    build_joint_generator,
    build_market_generator,
    build_reduced_joint,
    capacity,
    capacity_dirichlet,
    i_alpha,
    i_alpha_quadrature,
    joint_g_vector,
    joint_index,
    reduced_chain,
    solve_reduced_resolvent,
    solve_resolvent,
    two_well_limit_rate,
    verify_condition_r,
    verify_joint_condition,
    well_g_vector,
)
from .checks import (
    ExponentialityResult,
    MetastabilityReport,
    RateEstimate,
    SojournSample,
    empirical_rates,
    exponentiality,
    metastability_report,
    sojourns,
)
from .hmm import (
    HmmFit,
    HmmSpec,
    accumulate,
    align_by_emission,
    baum_welch,
    baum_welch_restarts,
    discretize,
    example_spec,
    forward_backward,
    simulate_hmm,
    viterbi,
)
from .config import ConfigError, RunConfig, parse_config, serialize_config

__version__ = "0.1.0"

__all__ = [
    "MarketParams",
    "WellLabel",
    "classify",
    "classify_table",
    "jump_rate_tables",
    "market_rates",
    "rate_g",
    "rate_g_table",
    "speedup_theta",
    "stationary_weights",
    "well_margin",
    "CouplingParams",
    "CouplingVariant",
    "limit_rates",
    "logistic_p",
    "observable_rates",
    "EventLog",
    "OccupationReport",
    "OrderPath",
    "PricePath",
    "Trajectory",
    "occupation_report",
    "occupation_time",
    "order_path",
    "price_path",
    "trace",
    "trajectory_from_events",
    "DEFAULT_EVENT_CAP",
    "rate_tables",
    "simulate",
    "ReducedChain",
    "ResolventSolution",
    "SparseGenerator",
    "build_joint_generator",
    "build_market_generator",
    "build_reduced_joint",
    "capacity",
    "capacity_dirichlet",
    "i_alpha",
    "i_alpha_quadrature",
    "joint_g_vector",
    "joint_index",
    "reduced_chain",
    "solve_reduced_resolvent",
    "solve_resolvent",
    "two_well_limit_rate",
    "verify_condition_r",
    "verify_joint_condition",
    "well_g_vector",
    "ExponentialityResult",
    "MetastabilityReport",
    "RateEstimate",
    "SojournSample",
    "empirical_rates",
    "exponentiality",
    "metastability_report",
    "sojourns",
    "HmmFit",
    "HmmSpec",
    "accumulate",
    "align_by_emission",
    "baum_welch",
    "baum_welch_restarts",
    "discretize",
    "example_spec",
    "forward_backward",
    "simulate_hmm",
    "viterbi",
    "ConfigError",
    "RunConfig",
    "parse_config",
    "serialize_config",
    "__version__",
]
