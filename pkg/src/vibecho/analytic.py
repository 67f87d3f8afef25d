"""Closed-form engine for the two-pulse vibrational echo.

Dynamical model (natural units, rotating frame): between pulses the
electronic ground manifold is force free and the excited manifold feels
the constant force f, so a packet transferred to E at time t' is rigidly
accelerated in momentum,

    psi_E(p; t) = psi_E(p - f (t - t'); t').

An impulsive pulse of area phi and axis phase theta rotates the
electronic amplitudes pointwise,

    psi_G -> cos(phi/2) psi_G - e^{-i theta} sin(phi/2) psi_E
    psi_E -> e^{i theta} sin(phi/2) psi_G + cos(phi/2) psi_E,

the real rotation at theta = 0.  Two pulses (areas phi1 at t0 - tau,
phi2 at t0) leave two ground packets (momenta 0 and f tau) and two
accelerating excited packets.  The dipole <d> = int dp psi_G* psi_E
decomposes into four bilinear cross terms; grouping the two with zero
relative momentum gives the named responses

    free induction   (1/2) sin(phi1) A(f (t - t0 + tau))       t < t0
    second response  (1/2) sin(phi2) cos(phi1) A(f (t - t0))
    echo term       -(1/2) sin(phi1) sin^2(phi2/2) A(f (t - t0) - f tau)
    residual term    (1/2) sin(phi1) cos^2(phi2/2) A(f (t - t0) + f tau)

with A the ground-state momentum autocorrelation, Gaussian
A(q) = exp(-q^2 / (8 delta_p^2)).  The echo term rephases at t0 + tau.

The kinetic term, dropped from the linearized evolution above, converts
the momentum histories of the two echo partners into a relative position
shift  Delta_x = F_E tau^2 / m  by the rephasing time, which suppresses
the echo by the decoherence factor

    xi(tau) = int dp e^{-i Delta_x p / hbar} |psi_0(p)|^2
            = exp(-F_E^2 Omega tau^4 / (4 hbar m)),

a quartic decay with 1/e time  T = (4 hbar m / (F_E^2 Omega))^(1/4).
The window between prompt dephasing (t_phi = delta_p / F_E) and T has
the unit-free width  T / t_phi = 2 sqrt(f).

Units: the scalar timescale functions (dephasing_time, decoherence_time,
decoherence_factor, position_shift) evaluate their formula in whatever
unit system the parameter set declares.  Everything taking a schedule
or a time axis requires natural units (params.to_natural(), times as
Omega * t); mixing systems there would corrupt the envelopes silently,
so it raises instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    NATURAL_DELTA_P,
    DipoleTrace,
    Grid,
    PhysicalParams,
    PulseSchedule,
    VibronicState,
    require_natural,
)

__all__ = [
    "ground_autocorrelation",
    "analytic_state_between",
    "analytic_state_after",
    "dipole_free_induction",
    "dipole_second_response",
    "dipole_echo_term",
    "dipole_residual_term",
    "echo_envelope_with_decoherence",
    "EchoTermDecomposition",
    "echo_term_decomposition",
    "dephasing_time",
    "position_shift",
    "decoherence_factor",
    "decoherence_factor_from_state",
    "decoherence_time",
    "timescale_ratio",
    "analytic_dipole_trace",
]


def ground_autocorrelation(shift):
    """A(q) = exp(-q^2 / (8 delta_p^2)) for the Gaussian ground packet.

    Natural units, so 8 delta_p^2 = 4.  Accepts scalars or arrays.
    """
    q = np.asarray(shift, dtype=float)
    out = np.exp(-q * q / 4.0)
    return out if out.ndim else float(out)


def _gaussian_momentum(p: np.ndarray, center) -> np.ndarray:
    """Normalized ground packet at momentum `center`, delta_p = 1/sqrt(2)."""
    w2 = NATURAL_DELTA_P ** 2
    return (2.0 * math.pi * w2) ** -0.25 * np.exp(-(p - center) ** 2 / (4.0 * w2))


def _halves(schedule: PulseSchedule):
    c1 = math.cos(schedule.area1 / 2.0)
    s1 = math.sin(schedule.area1 / 2.0)
    c2 = math.cos(schedule.area2 / 2.0)
    s2 = math.sin(schedule.area2 / 2.0)
    return c1, s1, c2, s2


# ----------------------------------------------------------------------
# states
# ----------------------------------------------------------------------

def analytic_state_between(params: PhysicalParams, schedule: PulseSchedule,
                           grid: Grid, t: float) -> VibronicState:
    """State during the inter-pulse window t0 - tau <= t < t0.

    Ground amplitude cos(phi1/2) psi_0(p); excited amplitude
    sin(phi1/2) psi_0(p - f (t - t0 + tau)), momentum representation.
    """
    if not (schedule.first_pulse_time <= t < schedule.t0):
        raise ValueError(
            f"t = {t!r} outside the inter-pulse window "
            f"[{schedule.first_pulse_time!r}, {schedule.t0!r})")
    f = require_natural(params).force
    c1, s1, _, _ = _halves(schedule)
    shift = f * (t - schedule.t0 + schedule.tau)
    g = c1 * _gaussian_momentum(grid.p, 0.0) + 0.0j
    e = (s1 * np.exp(1j * schedule.phase1)) * _gaussian_momentum(grid.p, shift)
    return VibronicState(grid, g, e, "momentum")


def analytic_state_after(params: PhysicalParams, schedule: PulseSchedule,
                         grid: Grid, t: float) -> VibronicState:
    """Four-packet state for t >= t0 (momentum representation).

    Ground manifold: the original packet at p = 0 plus, with a minus
    sign, the accelerated packet parked at p = f tau by the second
    pulse.  Excited manifold: two packets accelerating from p = 0 and
    p = f tau.  Weights follow the rotation convention in the module
    docstring.
    """
    if t < schedule.t0:
        raise ValueError(f"t = {t!r} is before the second pulse at {schedule.t0!r}")
    f = require_natural(params).force
    c1, s1, c2, s2 = _halves(schedule)
    ph1 = np.exp(1j * schedule.phase1)
    ph2 = np.exp(1j * schedule.phase2)
    tau, s = schedule.tau, t - schedule.t0
    p = grid.p
    g = (c2 * c1 * _gaussian_momentum(p, 0.0)
         - (ph1 / ph2) * s1 * s2 * _gaussian_momentum(p, f * tau))
    e = (ph2 * s2 * c1 * _gaussian_momentum(p, f * s)
         + ph1 * c2 * s1 * _gaussian_momentum(p, f * tau + f * s))
    return VibronicState(grid, g, e, "momentum")


# ----------------------------------------------------------------------
# dipole responses
# ----------------------------------------------------------------------

def dipole_free_induction(params: PhysicalParams, schedule: PulseSchedule, t):
    """Free-induction envelope (1/2) sin(phi1) A(f (t - t0 + tau)).

    The physical trace follows it for t0 - tau <= t < t0.
    """
    f = require_natural(params).force
    t = np.asarray(t, dtype=float)
    amp = 0.5 * math.sin(schedule.area1) * np.exp(1j * schedule.phase1)
    out = amp * ground_autocorrelation(f * (t - schedule.t0 + schedule.tau))
    return out if out.ndim else complex(out)


def dipole_second_response(params: PhysicalParams, schedule: PulseSchedule, t):
    """Second-pulse envelope (1/2) sin(phi2) cos(phi1) A(f (t - t0)).

    Sum of the two zero-relative-momentum cross terms after the second
    pulse; decays as the excited packets accelerate away.
    """
    f = require_natural(params).force
    t = np.asarray(t, dtype=float)
    amp = (0.5 * math.sin(schedule.area2) * math.cos(schedule.area1)
           * np.exp(1j * schedule.phase2))
    out = amp * ground_autocorrelation(f * (t - schedule.t0))
    return out if out.ndim else complex(out)


def dipole_echo_term(params: PhysicalParams, schedule: PulseSchedule, t,
                     include_decoherence: bool = False):
    """Echo cross term, rephasing at t = t0 + tau.

    Envelope -(1/2) sin(phi1) sin^2(phi2/2) A(f (t - t0) - f tau); for
    equal areas the magnitude prefactor is (1/4) sin(phi) (1 - cos(phi)).
    With `include_decoherence` the kinetic-term suppression xi(tau)
    multiplies the term.
    """
    f = require_natural(params).force
    t = np.asarray(t, dtype=float)
    s2 = math.sin(schedule.area2 / 2.0)
    amp = (-math.sin(schedule.area1) * 0.5 * s2 * s2
           * np.exp(1j * (2.0 * schedule.phase2 - schedule.phase1)))
    if include_decoherence:
        amp = amp * decoherence_factor(params, schedule.tau)
    out = amp * ground_autocorrelation(f * (t - schedule.t0) - f * schedule.tau)
    return out if out.ndim else complex(out)


def dipole_residual_term(params: PhysicalParams, schedule: PulseSchedule, t):
    """Far-off-resonant cross term (1/2) sin(phi1) cos^2(phi2/2) A(f (t - t0) + f tau).

    The pairing of the unshifted ground packet with the excited packet
    launched from p = f tau; its momentum mismatch never closes, so it
    only matters while f tau is comparable to delta_p.
    """
    f = require_natural(params).force
    t = np.asarray(t, dtype=float)
    c2 = math.cos(schedule.area2 / 2.0)
    amp = 0.5 * math.sin(schedule.area1) * c2 * c2 * np.exp(1j * schedule.phase1)
    out = amp * ground_autocorrelation(f * (t - schedule.t0) + f * schedule.tau)
    return out if out.ndim else complex(out)


def echo_envelope_with_decoherence(params: PhysicalParams,
                                   schedule: PulseSchedule, t):
    """Echo term including xi(tau); the prediction the numeric echo
    readout at t0 + tau is compared against."""
    return dipole_echo_term(params, schedule, t, include_decoherence=True)


@dataclass(frozen=True)
class EchoTermDecomposition:
    """Named dipole envelopes plus the raw bilinear cross terms.

    Each field is a vectorized callable of time.  `second_response`
    equals `cross_00 + cross_tt` identically; `echo` is `cross_t0` and
    `residual` is `cross_0t`.  `total_after` sums all four and matches
    the dipole of `analytic_state_after` pointwise.
    """

    first_pulse: Callable
    second_response: Callable
    echo: Callable
    residual: Callable
    cross_00: Callable
    cross_tt: Callable
    cross_t0: Callable
    cross_0t: Callable
    total_after: Callable


def echo_term_decomposition(params: PhysicalParams,
                            schedule: PulseSchedule) -> EchoTermDecomposition:
    """Bilinear cross-term decomposition of the post-pulse dipole.

    Cross term ij pairs ground packet i with excited packet j, indexed
    by launch momentum (0 or f tau).  The sum of all four is the exact
    dipole of the four-packet state at every time.
    """
    nat = require_natural(params)
    f = nat.force
    c1, s1, c2, s2 = _halves(schedule)
    ph1 = np.exp(1j * schedule.phase1)
    ph2 = np.exp(1j * schedule.phase2)
    tau, t0 = schedule.tau, schedule.t0
    A = ground_autocorrelation

    def cross_00(t):
        s = np.asarray(t, dtype=float) - t0
        return ph2 * (c1 * c1 * c2 * s2) * A(f * s)

    def cross_tt(t):
        s = np.asarray(t, dtype=float) - t0
        return -ph2 * (s1 * s1 * s2 * c2) * A(f * s)

    def cross_t0(t):
        s = np.asarray(t, dtype=float) - t0
        return -(ph2 * ph2 / ph1) * (s1 * c1 * s2 * s2) * A(f * s - f * tau)

    def cross_0t(t):
        s = np.asarray(t, dtype=float) - t0
        return ph1 * (s1 * c1 * c2 * c2) * A(f * s + f * tau)

    def total_after(t):
        return cross_00(t) + cross_tt(t) + cross_t0(t) + cross_0t(t)

    return EchoTermDecomposition(
        first_pulse=lambda t: dipole_free_induction(nat, schedule, t),
        second_response=lambda t: dipole_second_response(nat, schedule, t),
        echo=lambda t: dipole_echo_term(nat, schedule, t),
        residual=lambda t: dipole_residual_term(nat, schedule, t),
        cross_00=cross_00,
        cross_tt=cross_tt,
        cross_t0=cross_t0,
        cross_0t=cross_0t,
        total_after=total_after,
    )


# ----------------------------------------------------------------------
# timescales
# ----------------------------------------------------------------------

def dephasing_time(params: PhysicalParams) -> float:
    """t_phi = delta_p / F_E, the free-induction decay time, own units.

    Infinite for F_E = 0 (nothing accelerates, nothing dephases).
    """
    if params.force == 0.0:
        return math.inf
    return params.delta_p / params.force

def position_shift(params: PhysicalParams, tau: float) -> float:
    """Relative position offset F_E tau^2 / m of the echo partners at
    the rephasing time, own units."""
    return params.force * tau * tau / params.mass


def decoherence_factor(params: PhysicalParams, tau: float) -> float:
    """xi(tau) = exp(-F_E^2 Omega tau^4 / (4 hbar m)), own units.

    Closed form of the characteristic-function integral for the
    Gaussian ground packet; equals 1/e at tau = T.
    """
    expo = (params.force ** 2 * params.ground_freq * tau ** 4
            / (4.0 * params.hbar * params.mass))
    return math.exp(-expo)


def decoherence_factor_from_state(params: PhysicalParams, tau: float,
                                  state: VibronicState) -> complex:
    """Characteristic-function route to xi for an arbitrary packet.

    Evaluates int dp e^{-i Delta_x p} |psi_G(p)|^2 by grid quadrature
    with Delta_x = f tau^2 (natural units).  Matches the closed form to
    high accuracy when the packet is the Gaussian ground state.
    """
    nat = require_natural(params)
    dx_shift = nat.force * tau * tau
    mom = state.to_momentum()
    dens = np.abs(mom.ground) ** 2
    pg = float(np.sum(dens)) * mom.grid.dp
    if pg == 0.0:
        raise ValueError("state has no ground amplitude")
    val = np.sum(dens * np.exp(-1j * dx_shift * mom.grid.p)) * mom.grid.dp
    return complex(val / pg)


def decoherence_time(params: PhysicalParams) -> float:
    """T = (4 hbar m / (F_E^2 Omega))^(1/4), own units; inf at F_E = 0."""
    if params.force == 0.0:
        return math.inf
    return (4.0 * params.hbar * params.mass
            / (params.force ** 2 * params.ground_freq)) ** 0.25


def timescale_ratio(params: PhysicalParams) -> float:
    """T / t_phi = 2 sqrt(f), unit free.

    Measures how many dephasing times fit inside the decoherence window;
    for typical molecular constants it is about 3.5.
    """
    return 2.0 * math.sqrt(params.dimensionless_force)


# ----------------------------------------------------------------------
# trace assembly
# ----------------------------------------------------------------------

def analytic_dipole_trace(params: PhysicalParams, schedule: PulseSchedule,
                          times, include_decoherence: bool = True,
                          pathway: str = "total") -> DipoleTrace:
    """Closed-form dipole trace on an arbitrary time base.

    pathway "total": zero before the first pulse, free induction
    between the pulses, then the coherent sum of all four cross terms
    (echo term multiplied by xi(tau) when `include_decoherence`).
    pathway "echo": the isolated echo term alone, zero before t0.
    Populations are those of the physical state in either case.

    A sample landing on a pulse time sees the post-pulse value, the
    same convention as the grid propagator; the branch cuts tolerate
    the rounding of accumulated time bases (t_start + k dt can sit a
    few ulp off the nominal pulse time).
    """
    if pathway not in ("total", "echo"):
        raise ValueError(f"unknown pathway {pathway!r}")
    nat = require_natural(params)
    f = nat.force
    t = np.asarray(times, dtype=float)
    d = np.zeros(t.shape, dtype=np.complex128)
    eps = 1e-9 * schedule.tau
    between = (t >= schedule.first_pulse_time - eps) & (t < schedule.t0 - eps)
    after = t >= schedule.t0 - eps
    if pathway == "total":
        if np.any(between):
            d[between] = dipole_free_induction(nat, schedule, t[between])
        if np.any(after):
            ta = t[after]
            d[after] = (dipole_second_response(nat, schedule, ta)
                        + dipole_echo_term(nat, schedule, ta,
                                           include_decoherence=include_decoherence)
                        + dipole_residual_term(nat, schedule, ta))
    else:
        if np.any(after):
            d[after] = dipole_echo_term(nat, schedule, t[after],
                                        include_decoherence=include_decoherence)

    c1, s1, c2, s2 = _halves(schedule)
    A_tau = float(ground_autocorrelation(f * schedule.tau))
    cos_dphase = math.cos(schedule.phase1 - schedule.phase2)
    pg = np.ones(t.shape)
    pe = np.zeros(t.shape)
    pg[between] = c1 * c1
    pe[between] = s1 * s1
    pg_after = (c1 * c1 * c2 * c2 + s1 * s1 * s2 * s2
                - 2.0 * c1 * c2 * s1 * s2 * cos_dphase * A_tau)
    pe_after = (s2 * s2 * c1 * c1 + c2 * c2 * s1 * s1
                + 2.0 * c1 * c2 * s1 * s2 * cos_dphase * A_tau)
    pg[after] = pg_after
    pe[after] = pe_after
    return DipoleTrace(times=t, dipole=d, ground_pop=pg, excited_pop=pe)
