"""Mechanical derivation, propagation and validation of Lindblad-form
quantum master equations from microscopic system + reservoir data."""

from .bath import (
    AnalyticBath,
    CorrelationTable,
    FiniteBath,
    center_couplings,
    correlation_function,
    default_broadening,
    delta_matrix,
    estimate_correlation_time,
    flat_thermal_bath,
    gamma_matrix,
    gibbs_state,
    half_fourier_w,
    hermitize_coupling,
    qubit_mode_bath,
    table_bath,
    two_time_correlation,
)
from .dynamics import (
    PropagationError,
    TimescaleReport,
    Trajectory,
    exact_oracle,
    interaction_picture,
    liouvillian_superoperator,
    propagate,
    timescale_report,
)
from .generator import (
    DeriveResult,
    DissipatorTerm,
    Generator,
    PauliReduction,
    RateTensors,
    SecularPolicy,
    apply_rhs,
    build_presecular,
    build_rate_tensors,
    build_standard_form,
    coarse_graining_f,
    derive_generator,
    generator_superoperator_matrix,
    kappa,
    kernel_superoperator_matrix,
    pauli_equations,
    rate_tensor_K,
    rhs_function,
    secular_filter,
)
from .linalg import (
    DimensionError,
    Superoperator,
    ValidationReport,
    hermitian_eigendecomposition,
    hermiticity_defect,
    matrix_exponential_unitary,
    partial_trace_bath,
    tensor_product,
    unvec,
    validate_density_matrix,
    vec,
)
from .scenario import (
    Scenario,
    ScenarioError,
    load_scenario,
    loads_scenario,
    scenario_from_data,
    serialize_scenario,
)
from .spectral import (
    BohrFrequencySet,
    EigenOperatorSet,
    Spectrum,
    bohr_frequencies,
    build_spectrum,
    eigenoperator,
    eigenoperator_decomposition,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticBath",
    "BohrFrequencySet",
    "CorrelationTable",
    "DeriveResult",
    "DimensionError",
    "DissipatorTerm",
    "EigenOperatorSet",
    "FiniteBath",
    "Generator",
    "PauliReduction",
    "PropagationError",
    "RateTensors",
    "Scenario",
    "ScenarioError",
    "SecularPolicy",
    "Spectrum",
    "Superoperator",
    "TimescaleReport",
    "Trajectory",
    "ValidationReport",
    "apply_rhs",
    "bohr_frequencies",
    "build_presecular",
    "build_rate_tensors",
    "build_spectrum",
    "build_standard_form",
    "center_couplings",
    "coarse_graining_f",
    "correlation_function",
    "delta_matrix",
    "derive_generator",
    "generator_superoperator_matrix",
    "eigenoperator",
    "eigenoperator_decomposition",
    "estimate_correlation_time",
    "exact_oracle",
    "flat_thermal_bath",
    "gamma_matrix",
    "default_broadening",
    "gibbs_state",
    "half_fourier_w",
    "hermitian_eigendecomposition",
    "hermiticity_defect",
    "hermitize_coupling",
    "interaction_picture",
    "kappa",
    "kernel_superoperator_matrix",
    "liouvillian_superoperator",
    "load_scenario",
    "loads_scenario",
    "matrix_exponential_unitary",
    "partial_trace_bath",
    "pauli_equations",
    "propagate",
    "qubit_mode_bath",
    "rate_tensor_K",
    "rhs_function",
    "scenario_from_data",
    "secular_filter",
    "serialize_scenario",
    "table_bath",
    "tensor_product",
    "timescale_report",
    "two_time_correlation",
    "unvec",
    "validate_density_matrix",
    "vec",
]
