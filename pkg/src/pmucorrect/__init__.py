"""Spoofing-resilient PMU measurements: simulation, analysis, correction.

A GPS-spoofed PMU reports all of its phasors rotated by a common unknown
angle. This package builds the linear measurement model of a PMU network,
simulates such attacks, analyzes when they are identifiable from topology
and PMU placement alone, and corrects spoofed measurements with a greedy
sparse estimator whose per-iteration work is confined to a single zone of
the measurement graph.
"""

from .angles import wrap_angle
from .attacks import (
    AlternativeMeasurements,
    AttackVector,
    MeasurementVector,
    StateVector,
    apply_attack,
    flat_state,
    generate_measurements,
    read_measurements_csv,
    sample_state,
    transform_alternative,
    write_measurements_csv,
)
from .correction import (
    CorrectionConfig,
    CorrectionResult,
    NlsConfig,
    NlsFit,
    ProjectionOperator,
    build_projection,
    greedy_correct,
    nls_support_fit,
    residue,
    set_tau,
)
from .experiment import (
    ExperimentSpec,
    ExperimentSummary,
    RunRecord,
    emit_results,
    generate_attack,
    generate_synthetic_network,
    run_experiment,
)
from .network import (
    Branch,
    CurrentRow,
    MeasurementSystem,
    NetworkError,
    NetworkModel,
    Pmu,
    VoltageRow,
    build_measurement_system,
    load_network,
    network_to_json,
    parse_network,
)
from .zones import (
    IdentifiabilityCheck,
    NullBasis,
    UnidentifiableAttack,
    Zone,
    ZoneBudgets,
    ZonePartition,
    check_identifiable,
    compute_zones,
    construct_unidentifiable_attack,
    null_space_basis,
    zone_thresholds,
)

__version__ = "0.1.0"

__all__ = [
    "wrap_angle",
    "AlternativeMeasurements",
    "AttackVector",
    "MeasurementVector",
    "StateVector",
    "apply_attack",
    "flat_state",
    "generate_measurements",
    "read_measurements_csv",
    "sample_state",
    "transform_alternative",
    "write_measurements_csv",
    "CorrectionConfig",
    "CorrectionResult",
    "NlsConfig",
    "NlsFit",
    "ProjectionOperator",
    "build_projection",
    "greedy_correct",
    "nls_support_fit",
    "residue",
    "set_tau",
    "ExperimentSpec",
    "ExperimentSummary",
    "RunRecord",
    "emit_results",
    "generate_attack",
    "generate_synthetic_network",
    "run_experiment",
    "Branch",
    "CurrentRow",
    "MeasurementSystem",
    "NetworkError",
    "NetworkModel",
    "Pmu",
    "VoltageRow",
    "build_measurement_system",
    "load_network",
    "network_to_json",
    "parse_network",
    "IdentifiabilityCheck",
    "NullBasis",
    "UnidentifiableAttack",
    "Zone",
    "ZoneBudgets",
    "ZonePartition",
    "check_identifiable",
    "compute_zones",
    "construct_unidentifiable_attack",
    "null_space_basis",
    "zone_thresholds",
]
