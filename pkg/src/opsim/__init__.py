"""opsim: Monte-Carlo simulator for opportunistic message dissemination in
rural patient-monitoring networks.

A hybrid network of mobile community members relays patient messages
device-to-device and hands them off to intermittently internet-connected
nodes; this package reproduces that model on a discrete grid with
period-switched Markov mobility and evaluates delivery probability and
latency across network configurations, seeds, and parameter sweeps.
"""

from .core import (
    ConfigError,
    ConnectivityState,
    GridSpec,
    MessageRecord,
    MobilityState,
    NodeClass,
    NodeRecord,
    RngStreams,
    RoutingMode,
    ScenarioConfig,
    Violation,
    build_population,
    validate_config,
)
from .contact import ContactEvent, contacts_at_step, in_contact
from .engine import (
    EngineOptions,
    RunResult,
    SweepResult,
    run_paired_modes,
    run_scenario,
    run_sweep,
)
from .estimation import ActivityLog, discretize, estimate_matrices, read_activity_csv
from .metrics import (
    MetricsReport,
    RunMetrics,
    aggregate_seeds,
    delivery_probability,
    latency_stats,
)
from .mobility import (
    PeriodSchedule,
    TransitionMatrixSet,
    default_matrix_set,
    initial_state,
    normalize_matrix_set,
    place_node,
    step_state,
)

__version__ = "0.1.0"

__all__ = [
    "ActivityLog",
    "ConfigError",
    "ConnectivityState",
    "ContactEvent",
    "EngineOptions",
    "GridSpec",
    "MessageRecord",
    "MetricsReport",
    "MobilityState",
    "NodeClass",
    "NodeRecord",
    "PeriodSchedule",
    "RngStreams",
    "RoutingMode",
    "RunMetrics",
    "RunResult",
    "ScenarioConfig",
    "SweepResult",
    "TransitionMatrixSet",
    "Violation",
    "aggregate_seeds",
    "build_population",
    "contacts_at_step",
    "default_matrix_set",
    "delivery_probability",
    "discretize",
    "estimate_matrices",
    "in_contact",
    "initial_state",
    "latency_stats",
    "normalize_matrix_set",
    "place_node",
    "read_activity_csv",
    "run_paired_modes",
    "run_scenario",
    "run_sweep",
    "step_state",
    "validate_config",
]
