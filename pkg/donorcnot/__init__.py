"""donorcnot: pulse-level simulation of coupler-mediated donor-spin CNOT gates."""

from __future__ import annotations

from .grape import (
    FidelityReport,
    GrapeConfig,
    PulseSequence,
    gradient,
    optimize,
    propagate_pulse,
    sweep,
    target_cnot,
    trace_fidelity,
)
from .hamiltonian import (
    DeviceParams,
    NuclearConfig,
    Spin,
    build_full,
    electron_drift,
    post_swap_nuclear_config,
    reduce_to_electron,
    rotating_frame_drift,
)
from .linalg import HermitianOperator, PureState, Unitary
from .placement import (
    CalibrationConstraints,
    ExchangeDistribution,
    ExchangeModelParams,
    calibrate,
    default_model,
    exchange_distribution,
    exchange_grid,
    symmetry_classes,
)
from .protocol import ProtocolRunner, run_protocol
from .scheduler import (
    OverlapGraph,
    ParallelPlan,
    build_overlap_graph,
    estimate_parallelism,
    greedy_parallel_sets,
)
from .spectra import TransitionTable, allowed_frequencies, band_overlap, transition_table

__all__ = [
    "CalibrationConstraints",
    "DeviceParams",
    "ExchangeDistribution",
    "ExchangeModelParams",
    "FidelityReport",
    "GrapeConfig",
    "HermitianOperator",
    "NuclearConfig",
    "OverlapGraph",
    "ParallelPlan",
    "ProtocolRunner",
    "PulseSequence",
    "PureState",
    "Spin",
    "TransitionTable",
    "Unitary",
    "allowed_frequencies",
    "band_overlap",
    "build_full",
    "build_overlap_graph",
    "calibrate",
    "default_model",
    "electron_drift",
    "estimate_parallelism",
    "exchange_distribution",
    "exchange_grid",
    "gradient",
    "greedy_parallel_sets",
    "optimize",
    "post_swap_nuclear_config",
    "propagate_pulse",
    "reduce_to_electron",
    "rotating_frame_drift",
    "run_protocol",
    "sweep",
    "symmetry_classes",
    "target_cnot",
    "trace_fidelity",
    "transition_table",
]

__version__ = "0.1.0"
