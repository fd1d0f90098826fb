"""Event-driven zero-range process simulator and SPDE reference harness."""

from .params import ModelParams, derive_params
from .model import Configuration, apply_move, empty_configuration, sample_equilibrium
from .dynamics import (
    CurrentLedger,
    Event,
    EventKind,
    SimState,
    apply_event,
    centered_current,
    initial_state,
    next_event,
    reference_run,
    simulate,
    total_rate,
)
from .rng import RandomStream, derive_replica_seed

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "derive_params",
    "Configuration",
    "apply_move",
    "empty_configuration",
    "sample_equilibrium",
    "CurrentLedger",
    "Event",
    "EventKind",
    "SimState",
    "apply_event",
    "centered_current",
    "initial_state",
    "next_event",
    "reference_run",
    "simulate",
    "total_rate",
    "RandomStream",
    "derive_replica_seed",
    "__version__",
]
