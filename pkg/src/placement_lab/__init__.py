"""Replica-placement simulator and mean-field analytics for distributed storage.

Simulates a cluster of nodes holding replicated data blocks under Poisson
failures, with three placement policies (random, least loaded, power of
choice) and two repair models (instant idealized repair, or periodic
maintenance with queued transfers). The meanfield module evaluates the
matching large-system limit laws and the stats module fits simulation output
against them.
"""

from placement_lab.core import (
    Bootstrap,
    ConfigError,
    Mode,
    NodeId,
    BlockId,
    SimConfig,
    SystemState,
    place_initial,
    verify_state,
)
from placement_lab.meanfield import (
    LimitProcessSample,
    TailVector,
    poc_invariant_tail,
    poc_ode_residual,
    poc_tail_ode,
    point_mass_tail,
    random_invariant_tail,
    scaled_limit_tail,
    simulate_limit_random,
)
from placement_lab.policies import (
    PolicyKind,
    SelectionError,
    select,
    select_least_loaded,
    select_power_of_choice,
    select_random,
)
from placement_lab.simulator import (
    EventTrace,
    FailureClock,
    Snapshot,
    TraceDiagnostics,
    TransferQueue,
    compensator_diagnostic,
    fail_node_idealized,
    run,
    run_detailed,
    run_idealized,
)
from placement_lab.stats import (
    EmpiricalDistribution,
    FitReport,
    MaxLoadStats,
    empirical_cdf,
    fit_report,
    ks_distance,
    load_vs_age,
    max_load_stats,
    stationary_loads,
)

__version__ = "0.1.0"

__all__ = [
    "Bootstrap",
    "BlockId",
    "ConfigError",
    "EmpiricalDistribution",
    "EventTrace",
    "FailureClock",
    "FitReport",
    "LimitProcessSample",
    "MaxLoadStats",
    "Mode",
    "NodeId",
    "PolicyKind",
    "SelectionError",
    "SimConfig",
    "Snapshot",
    "SystemState",
    "TailVector",
    "TraceDiagnostics",
    "TransferQueue",
    "compensator_diagnostic",
    "empirical_cdf",
    "fail_node_idealized",
    "fit_report",
    "ks_distance",
    "load_vs_age",
    "max_load_stats",
    "place_initial",
    "poc_invariant_tail",
    "poc_ode_residual",
    "poc_tail_ode",
    "point_mass_tail",
    "random_invariant_tail",
    "run",
    "run_detailed",
    "run_idealized",
    "scaled_limit_tail",
    "select",
    "select_least_loaded",
    "select_power_of_choice",
    "select_random",
    "simulate_limit_random",
    "stationary_loads",
    "verify_state",
]
