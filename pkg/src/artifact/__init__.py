"""Conditional phase gates between ions in separate microtraps.

Simulation and analysis of two-qubit phase gates driven by a state-dependent
Gaussian force pulse: trap/mode geometry, classical and exact quantum phase
accumulation, anharmonic corrections, a brute-force amplitude-equation
integrator, and the N-ion chain generalization, plus a CLI (`iongate`).
"""

from .errors import (
    ConfigError,
    DomainError,
    NonConvergenceError,
    NumericIntegrityError,
)
from .model import (
    CA40,
    ForcePulse,
    IonSpecies,
    TrapModel,
    build_trap_model,
    displacement,
    force_profile,
)
from .classical import (
    ClassicalFidelity,
    ClassicalInitial,
    ClassicalPhaseTable,
    MeanGatePhase,
    ThermalEnsemble,
    classical_fidelity,
    classical_phase_table,
    gate_phase_polylog,
    mean_gate_phase,
    phi_cl_ground,
    theta_cl,
)
from .quantum import (
    GROUND,
    GateReport,
    KickIntegral,
    MotionalState,
    PhaseTable,
    QuantumFidelity,
    build_phase_table,
    compose_gate,
    delta_theta,
    fidelity_crossing_temperature,
    first_order_phase_shift,
    gate_phase_theta,
    kick_integral,
    mean_delta_theta,
    motional_overlap,
    perturbation_deltas,
    phi_of_omega,
    quantum_fidelity,
    static_phase_shift,
    tune_tau,
    undo_single_particle_phases,
    unperturbed_phases,
)
from .chain import (
    ChainCoefficients,
    ChainConfig,
    ChainPhaseTable,
    PairPhase,
    chain_coefficients,
    chain_phase_table,
    pair_phase,
)
from .numint import (
    EvolveResult,
    NumericGatePhase,
    SimCheckpoint,
    SimGrid,
    SimState,
    derivative,
    effective_matrix,
    evolve,
    numeric_gate_phase,
    phase_series,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "NonConvergenceError",
    "NumericIntegrityError",
    "CA40",
    "ForcePulse",
    "IonSpecies",
    "TrapModel",
    "build_trap_model",
    "displacement",
    "force_profile",
    "ClassicalFidelity",
    "ClassicalInitial",
    "ClassicalPhaseTable",
    "MeanGatePhase",
    "ThermalEnsemble",
    "classical_fidelity",
    "classical_phase_table",
    "gate_phase_polylog",
    "mean_gate_phase",
    "phi_cl_ground",
    "theta_cl",
    "GROUND",
    "GateReport",
    "KickIntegral",
    "MotionalState",
    "PhaseTable",
    "QuantumFidelity",
    "build_phase_table",
    "compose_gate",
    "delta_theta",
    "fidelity_crossing_temperature",
    "first_order_phase_shift",
    "gate_phase_theta",
    "kick_integral",
    "mean_delta_theta",
    "motional_overlap",
    "perturbation_deltas",
    "phi_of_omega",
    "quantum_fidelity",
    "static_phase_shift",
    "tune_tau",
    "undo_single_particle_phases",
    "unperturbed_phases",
    "ChainCoefficients",
    "ChainConfig",
    "ChainPhaseTable",
    "PairPhase",
    "chain_coefficients",
    "chain_phase_table",
    "pair_phase",
    "EvolveResult",
    "NumericGatePhase",
    "SimCheckpoint",
    "SimGrid",
    "SimState",
    "derivative",
    "effective_matrix",
    "evolve",
    "numeric_gate_phase",
    "phase_series",
    "__version__",
]
