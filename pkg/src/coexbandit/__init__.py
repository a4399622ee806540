"""Bandit convex optimisation of LTE duty cycles coexisting with WiFi."""

from .adversaries import (
    CustomSequence,
    DriftSequence,
    FixedSequence,
    LossFunction,
    PiecewiseSequence,
    RegretLedger,
    best_fixed_point,
    corollary_bound,
    golden_section,
    instantaneous_deviation,
    regret,
    theorem1_bound,
    total_deviation,
)
from .coexistence import (
    CoexistenceParams,
    MacParams,
    airtime_corrections,
    analytic_gradient,
    cost,
    lte_throughput,
    optimal_ztilde,
    toff_to_ztilde,
    wifi_baseline_rate,
    wifi_throughput,
    ztilde_to_toff,
)
from .experiments import (
    DynamicsEvent,
    EnvConfig,
    ExperimentPlan,
    LearnerConfig,
    TrajectoryRecord,
    aggregate,
    preset,
    run_plan,
)
from .learner import DecisionInterval, OGDSeMP, ProtocolError, StepReport, gradient_estimate, project
from .packet_sim import BatchResult, BatchTooShort, SimConfig, noisy_cost, run_batch, sample_toff

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
