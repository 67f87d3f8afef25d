"""Molecular parameters, grids, and two-manifold vibrational states.

Model: a two-level molecule (electronic ground state G, excited state E)
with a single vibrational coordinate.  The vibrational wavepacket has one
component per electronic manifold,

    |psi> = psi_G(x) |G> + psi_E(x) |E>,

normalized so that the G and E populations sum to one.  The transition
dipole expectation value is the overlap <d> = integral psi_G* psi_E, in
units of the electronic transition dipole.

Unit conventions
----------------
All grids, states, and dynamical quantities live in natural units

    hbar = m = Omega = 1,

where m is the reduced mass and Omega the ground-state vibrational
frequency.  In these units the ground-state momentum spread is
delta_p = 1/sqrt(2) and the only free dynamical parameter is the
dimensionless excited-state force f = F_E / sqrt(hbar m Omega^3).
`PhysicalParams` stores laboratory (SI) or natural values and converts at
the boundary; everything downstream of `make_ground_state` is natural.

Representations
---------------
States carry their active representation tag.  Position and momentum
amplitudes are related by the unitary continuum convention

    psi(p) = (2 pi)^(-1/2) integral dx psi(x) exp(-i p x),

discretized with the FFT so that sum |psi|^2 * spacing is preserved to
round-off.  Grid axes are monotonic and symmetric about zero, with the
exact duality dx * dp = 2 pi / n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.constants import hbar as HBAR_SI
from scipy.fft import fft, fftshift, ifft

NATURAL_DELTA_P = 1.0 / math.sqrt(2.0)  # sqrt(hbar*m*Omega/2) at hbar=m=Omega=1


class GridTooNarrowError(ValueError):
    """Grid does not span enough of phase space for the requested state."""


# ----------------------------------------------------------------------
# parameters
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PhysicalParams:
    """Molecular constants in a declared unit system.

    Parameters
    ----------
    mass : float
        Reduced mass of the vibrational mode (kg in SI, 1 in natural units).
    ground_freq : float
        Vibrational angular frequency Omega of the ground-state surface
        (rad/s in SI, 1 in natural units).
    force : float
        Magnitude F_E of the excited-state potential gradient at the
        ground-state equilibrium position (N in SI).
    gap : float
        Electronic transition frequency omega_0 (rad/s in SI).  Dynamics
        are computed in the rotating frame, so the gap only sets a carrier
        phase and is carried for reporting.
    unit_system : str
        "si" or "natural".  Natural units require mass = ground_freq = 1.
    """

    mass: float
    ground_freq: float
    force: float
    gap: float = 0.0
    unit_system: str = "si"

    def __post_init__(self) -> None:
        if self.unit_system not in ("si", "natural"):
            raise ValueError(f"unknown unit system {self.unit_system!r}")
        for name in ("mass", "ground_freq", "force", "gap"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
        if self.mass <= 0.0 or self.ground_freq <= 0.0:
            raise ValueError("mass and ground_freq must be positive")
        if self.force < 0.0 or self.gap < 0.0:
            raise ValueError("force and gap must be nonnegative")
        if self.unit_system == "natural" and (self.mass != 1.0 or self.ground_freq != 1.0):
            raise ValueError("natural units fix mass = ground_freq = 1")

    @classmethod
    def natural(cls, force: float, gap: float = 0.0) -> "PhysicalParams":
        """Natural-unit parameter set; `force` is the dimensionless f."""
        return cls(mass=1.0, ground_freq=1.0, force=force, gap=gap,
                   unit_system="natural")

    @classmethod
    def si(cls, mass: float, ground_freq: float, force: float,
           gap: float = 0.0) -> "PhysicalParams":
        return cls(mass=mass, ground_freq=ground_freq, force=force, gap=gap,
                   unit_system="si")

    @property
    def hbar(self) -> float:
        return 1.0 if self.unit_system == "natural" else HBAR_SI

    @property
    def delta_p(self) -> float:
        """Ground-state momentum spread sqrt(hbar*Omega*m/2), own units."""
        return math.sqrt(self.hbar * self.ground_freq * self.mass / 2.0)

    @property
    def dimensionless_force(self) -> float:
        """f = F_E / sqrt(hbar * m * Omega^3), invariant under unit choice."""
        return self.force / math.sqrt(self.hbar * self.mass * self.ground_freq ** 3)

    # scale factors mapping natural-unit values to this parameter set's units
    @property
    def time_scale(self) -> float:
        return 1.0 / self.ground_freq

    @property
    def momentum_scale(self) -> float:
        return math.sqrt(self.hbar * self.mass * self.ground_freq)

    @property
    def length_scale(self) -> float:
        return math.sqrt(self.hbar / (self.mass * self.ground_freq))

    def to_natural(self) -> "PhysicalParams":
        """Equivalent natural-unit parameter set (dimensionless force, gap)."""
        if self.unit_system == "natural":
            return self
        return PhysicalParams.natural(
            force=self.dimensionless_force,
            gap=self.gap / self.ground_freq,
        )


def require_natural(params: PhysicalParams) -> PhysicalParams:
    """Reject parameter sets that are not in natural units.

    Functions taking times or schedules alongside params use this:
    mixing SI seconds with the dimensionless force would silently give
    wrong envelopes, so the conversion (times as Omega * t, params via
    to_natural) must happen before the call.
    """
    if params.unit_system != "natural":
        raise ValueError(
            "natural units required here; convert with "
            "PhysicalParams.to_natural() and express times as Omega * t")
    return params


@dataclass(frozen=True)
class PulseSchedule:
    """Two impulsive excitation pulses at t0 - tau and t0.

    Areas are the usual pulse areas (pi transfers all population).  The
    axis phases generalize the real rotation convention and default to
    zero; cycling phase2 is how the echo pathway is isolated, see
    scans.echo_pathway_trace.
    """

    t0: float
    tau: float
    area1: float
    area2: float
    phase1: float = 0.0
    phase2: float = 0.0

    def __post_init__(self) -> None:
        for name in ("t0", "tau", "area1", "area2", "phase1", "phase2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")

    @property
    def first_pulse_time(self) -> float:
        return self.t0 - self.tau

    def with_phases(self, phase1: float, phase2: float) -> "PulseSchedule":
        return PulseSchedule(self.t0, self.tau, self.area1, self.area2,
                             phase1, phase2)


# ----------------------------------------------------------------------
# grid and states
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform phase-space grid with FFT-dual position and momentum axes.

    Position axis: x_j = (j - n/2) dx, j = 0 .. n-1.
    Momentum axis: p_k = (k - n/2) dp with dp = 2 pi / (n dx), so both
    axes are monotonic, symmetric about zero, and satisfy the exact
    duality dx * dp = 2 pi / n (hbar = 1).
    """

    n_points: int
    dx: float

    def __post_init__(self) -> None:
        if self.n_points < 8 or self.n_points % 2 != 0:
            raise ValueError("n_points must be even and at least 8")
        if not (math.isfinite(self.dx) and self.dx > 0.0):
            raise ValueError("dx must be positive and finite")

    @property
    def dp(self) -> float:
        return 2.0 * math.pi / (self.n_points * self.dx)

    @cached_property
    def x(self) -> np.ndarray:
        ax = (np.arange(self.n_points) - self.n_points // 2) * self.dx
        ax.setflags(write=False)
        return ax

    @cached_property
    def p(self) -> np.ndarray:
        ax = (np.arange(self.n_points) - self.n_points // 2) * self.dp
        ax.setflags(write=False)
        return ax

    def spacing(self, representation: str) -> float:
        return {"position": self.dx, "momentum": self.dp}[representation]

    def extent(self, representation: str) -> float:
        """Full axis length covered in the given representation."""
        return self.n_points * self.spacing(representation)

    @classmethod
    def for_momentum_extent(cls, p_half: float, n_points: int = 4096) -> "Grid":
        """Grid whose momentum axis covers [-p_half, p_half)."""
        if not (math.isfinite(p_half) and p_half > 0.0):
            raise ValueError("p_half must be positive and finite")
        return cls(n_points=n_points, dx=math.pi / p_half)


def _as_readonly_complex(a) -> np.ndarray:
    out = np.array(a, dtype=np.complex128, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class VibronicState:
    """Two-component vibrational wavepacket on a grid.

    Immutable value object: operations return new states.  `ground` and
    `excited` are the amplitudes on the active representation's axis.
    """

    grid: Grid
    ground: np.ndarray = field(repr=False)
    excited: np.ndarray = field(repr=False)
    representation: str = "momentum"

    def __post_init__(self) -> None:
        if self.representation not in ("position", "momentum"):
            raise ValueError(f"unknown representation {self.representation!r}")
        g = _as_readonly_complex(self.ground)
        e = _as_readonly_complex(self.excited)
        if g.shape != (self.grid.n_points,) or e.shape != (self.grid.n_points,):
            raise ValueError("component shapes must match the grid")
        object.__setattr__(self, "ground", g)
        object.__setattr__(self, "excited", e)

    @property
    def axis(self) -> np.ndarray:
        return self.grid.x if self.representation == "position" else self.grid.p

    def norm(self) -> float:
        w = self.grid.spacing(self.representation)
        total = (np.sum(np.abs(self.ground) ** 2)
                 + np.sum(np.abs(self.excited) ** 2)) * w
        return math.sqrt(float(total))

    def to_momentum(self) -> "VibronicState":
        if self.representation == "momentum":
            return self
        return VibronicState(self.grid,
                             _position_to_momentum(self.ground, self.grid),
                             _position_to_momentum(self.excited, self.grid),
                             "momentum")

    def to_position(self) -> "VibronicState":
        if self.representation == "position":
            return self
        return VibronicState(self.grid,
                             _momentum_to_position(self.ground, self.grid),
                             _momentum_to_position(self.excited, self.grid),
                             "position")


def _position_to_momentum(psi_x: np.ndarray, grid: Grid) -> np.ndarray:
    # psi(p_k) = dx/sqrt(2 pi) * exp(-i p_k x_0) * FFT[psi]_k, then sorted
    x0 = grid.x[0]
    out = fftshift(fft(np.asarray(psi_x)))
    out *= grid.dx / math.sqrt(2.0 * math.pi) * np.exp(-1j * grid.p * x0)
    return out


def _momentum_to_position(psi_p: np.ndarray, grid: Grid) -> np.ndarray:
    x0 = grid.x[0]
    work = np.asarray(psi_p) * (math.sqrt(2.0 * math.pi) / grid.dx
                                * np.exp(1j * grid.p * x0))
    return ifft(fftshift(work))


@dataclass(frozen=True)
class DipoleTrace:
    """Time-resolved dipole expectation value with manifold populations.

    The dipole is the complex rotating-frame envelope; `frame_note`
    records the convention.  Populations are carried alongside because
    the trace CSV reports them.
    """

    times: np.ndarray = field(repr=False)
    dipole: np.ndarray = field(repr=False)
    ground_pop: np.ndarray = field(repr=False)
    excited_pop: np.ndarray = field(repr=False)
    frame_note: str = "rotating frame: carrier exp(-i*gap*(t - t0)) factored out"

    def __post_init__(self) -> None:
        t = np.array(self.times, dtype=float, copy=True)
        d = _as_readonly_complex(self.dipole)
        gp = np.array(self.ground_pop, dtype=float, copy=True)
        ep = np.array(self.excited_pop, dtype=float, copy=True)
        if not (t.shape == d.shape == gp.shape == ep.shape) or t.ndim != 1:
            raise ValueError("trace arrays must be 1-d and equally long")
        if t.size >= 2 and np.any(np.diff(t) <= 0.0):
            raise ValueError("times must be strictly increasing")
        for a in (t, gp, ep):
            a.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "dipole", d)
        object.__setattr__(self, "ground_pop", gp)
        object.__setattr__(self, "excited_pop", ep)

    def __len__(self) -> int:
        return int(self.times.size)


# ----------------------------------------------------------------------
# operations
# ----------------------------------------------------------------------

def default_grid(params: PhysicalParams, total_time: float = 0.0,
                 n_points: int = 4096) -> Grid:
    """Grid sized for an echo simulation of the given duration.

    The momentum axis must hold the initial spread (8 delta_p on either
    side) plus the full momentum sweep f * total_time accumulated on the
    excited surface over the simulated window (natural units).
    """
    if total_time < 0.0 or not math.isfinite(total_time):
        raise ValueError("total_time must be nonnegative and finite")
    f = params.to_natural().force
    p_half = 8.0 * NATURAL_DELTA_P + f * total_time + 2.0 * NATURAL_DELTA_P
    return Grid.for_momentum_extent(p_half, n_points=n_points)


def make_ground_state(params: PhysicalParams, grid: Grid,
                      representation: str = "momentum") -> VibronicState:
    """Vibrational ground state on the G surface, E amplitude zero.

    The packet is the harmonic-oscillator ground state, a minimum
    uncertainty Gaussian with delta_p = 1/sqrt(2) in natural units.

    Raises
    ------
    GridTooNarrowError
        If either axis spans less than 8 standard deviations of the
        packet, or the truncated tail weight exceeds 1e-12.
    """
    params.to_natural()  # validates
    dp_width = NATURAL_DELTA_P
    dx_width = 0.5 / dp_width  # delta_x * delta_p = 1/2
    if grid.extent("momentum") / 2.0 < 8.0 * dp_width:
        raise GridTooNarrowError(
            f"momentum half extent {grid.extent('momentum') / 2.0:.3g} is below "
            f"8 delta_p = {8.0 * dp_width:.3g}")
    if grid.extent("position") / 2.0 < 8.0 * dx_width:
        raise GridTooNarrowError(
            f"position half extent {grid.extent('position') / 2.0:.3g} is below "
            f"8 delta_x = {8.0 * dx_width:.3g}")
    if representation == "momentum":
        axis, width = grid.p, dp_width
    elif representation == "position":
        axis, width = grid.x, dx_width
    else:
        raise ValueError(f"unknown representation {representation!r}")
    psi = (2.0 * math.pi * width ** 2) ** -0.25 * np.exp(
        -axis ** 2 / (4.0 * width ** 2))
    tail = abs(1.0 - float(np.sum(np.abs(psi) ** 2)) * grid.spacing(representation))
    if tail > 1e-12:
        raise GridTooNarrowError(f"truncated tail weight {tail:.3g} exceeds 1e-12")
    zero = np.zeros_like(psi, dtype=np.complex128)
    return VibronicState(grid, psi.astype(np.complex128), zero, representation)


def dipole_expectation(state: VibronicState) -> complex:
    """<d> = integral psi_G* psi_E, representation independent."""
    w = state.grid.spacing(state.representation)
    return complex(np.sum(np.conj(state.ground) * state.excited) * w)


def populations(state: VibronicState) -> tuple[float, float]:
    """(ground, excited) populations; they sum to norm squared."""
    w = state.grid.spacing(state.representation)
    pg = float(np.sum(np.abs(state.ground) ** 2)) * w
    pe = float(np.sum(np.abs(state.excited) ** 2)) * w
    return pg, pe


def momentum_autocorrelation(state: VibronicState, shift: float,
                             component: str = "ground") -> complex:
    """Overlap integral dp psi*(p) psi(p - shift) of one component.

    Evaluated in the position representation, where a rigid momentum
    shift is the phase factor exp(i * shift * x); this keeps arbitrary
    (off-grid) shifts exact for band-limited states.

    Raises
    ------
    GridTooNarrowError
        If |shift| exceeds the grid's momentum extent.
    """
    if abs(shift) > state.grid.extent("momentum"):
        raise GridTooNarrowError(
            f"momentum shift {shift:.3g} exceeds the grid extent "
            f"{state.grid.extent('momentum'):.3g}")
    pos = state.to_position()
    psi = {"ground": pos.ground, "excited": pos.excited}[component]
    dens = np.abs(psi) ** 2
    return complex(np.sum(dens * np.exp(1j * shift * pos.grid.x)) * pos.grid.dx)
