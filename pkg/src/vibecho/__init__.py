"""Vibrational photon echoes from impulsive two-pulse excitation.

A two-level electronic system sits in a harmonic vibrational mode; the
excited surface is displaced, so optical excitation kicks the mode and
the vibrational overlap decides how much optical coherence survives.
Two impulsive pulses separated by a delay produce an echo at the same
delay after the second pulse, and the echo amplitude decays with a
quartic exponent in the delay.  The package provides closed forms for
the whole dipole trace, a split-operator grid propagation of the same
model, delay scans with pathway isolation, and a command line front
end.
"""

from .core import (
    NATURAL_DELTA_P,
    DipoleTrace,
    Grid,
    GridTooNarrowError,
    PhysicalParams,
    PulseSchedule,
    VibronicState,
    default_grid,
    dipole_expectation,
    make_ground_state,
    momentum_autocorrelation,
    populations,
)
from .analytic import (
    EchoTermDecomposition,
    analytic_dipole_trace,
    analytic_state_after,
    analytic_state_between,
    decoherence_factor,
    decoherence_factor_from_state,
    decoherence_time,
    dephasing_time,
    dipole_echo_term,
    dipole_free_induction,
    dipole_residual_term,
    dipole_second_response,
    echo_envelope_with_decoherence,
    echo_term_decomposition,
    ground_autocorrelation,
    position_shift,
    timescale_ratio,
)
from .propagator import (
    GridEdgeError,
    PotentialSpec,
    PropagationConfig,
    apply_impulsive_pulse,
    convergence_gap,
    default_propagation_config,
    heuristic_dt,
    simulate_trace,
    step_split_operator,
)
from .scans import (
    ComparisonReport,
    EchoPeak,
    EchoScan,
    FitRangeError,
    QuarticFit,
    compare_analytic_numeric,
    echo_prefactor,
    extract_echo_peak,
    fit_quartic_decay,
    phase_cycled_echo,
    tau_scan,
)

__version__ = "0.1.0"

__all__ = [
    "NATURAL_DELTA_P",
    "DipoleTrace",
    "Grid",
    "GridTooNarrowError",
    "PhysicalParams",
    "PulseSchedule",
    "VibronicState",
    "default_grid",
    "dipole_expectation",
    "make_ground_state",
    "momentum_autocorrelation",
    "populations",
    "EchoTermDecomposition",
    "analytic_dipole_trace",
    "analytic_state_after",
    "analytic_state_between",
    "decoherence_factor",
    "decoherence_factor_from_state",
    "decoherence_time",
    "dephasing_time",
    "dipole_echo_term",
    "dipole_free_induction",
    "dipole_residual_term",
    "dipole_second_response",
    "echo_envelope_with_decoherence",
    "echo_term_decomposition",
    "ground_autocorrelation",
    "position_shift",
    "timescale_ratio",
    "GridEdgeError",
    "PotentialSpec",
    "PropagationConfig",
    "apply_impulsive_pulse",
    "convergence_gap",
    "default_propagation_config",
    "heuristic_dt",
    "simulate_trace",
    "step_split_operator",
    "ComparisonReport",
    "EchoPeak",
    "EchoScan",
    "FitRangeError",
    "QuarticFit",
    "compare_analytic_numeric",
    "echo_prefactor",
    "extract_echo_peak",
    "fit_quartic_decay",
    "phase_cycled_echo",
    "tau_scan",
    "__version__",
]
