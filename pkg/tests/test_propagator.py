"""Split-operator engine against exactly solvable Gaussian dynamics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vibecho.analytic import decoherence_factor
from vibecho.core import (
    PhysicalParams,
    PulseSchedule,
    default_grid,
    make_ground_state,
    populations,
)
from vibecho.propagator import (
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
from vibecho.scans import echo_prefactor, phase_cycled_echo

NAT = PhysicalParams.natural(force=3.079)


# ----------------------------------------------------------------------
# exact Gaussian reference: (xbar, pbar, a) with psi ~ exp(-a (x-xbar)^2 / 2
# + i pbar (x-xbar)); the overlap formula was checked against direct
# quadrature to 1e-15
# ----------------------------------------------------------------------

def _free(c, t):
    xb, pb, a = c
    return xb + pb * t, pb, a / (1.0 + 1j * a * t)


def _accel(c, t, f):
    xb, pb, a = c
    return (xb + pb * t + 0.5 * f * t * t, pb + f * t,
            a / (1.0 + 1j * a * t))


def _overlap(c1, c2):
    xb1, pb1, a1 = c1
    xb2, pb2, a2 = c2
    A = 0.5 * (np.conj(a1) + a2)
    B = np.conj(a1) * xb1 + a2 * xb2 - 1j * pb1 + 1j * pb2
    C = (-0.5 * np.conj(a1) * xb1 ** 2 - 0.5 * a2 * xb2 ** 2
         + 1j * pb1 * xb1 - 1j * pb2 * xb2)
    norm = (np.real(a1) * np.real(a2)) ** 0.25 / math.sqrt(math.pi)
    return norm * np.sqrt(math.pi / A) * np.exp(B * B / (4.0 * A) + C)


# ----------------------------------------------------------------------
# potentials and pulses
# ----------------------------------------------------------------------

def test_potential_invariants():
    pot = PotentialSpec.from_params(NAT)
    assert pot.ground_freq == 1.0
    assert pot.ground_potential(np.array([0.0]))[0] == 0.0
    # slope of the excited surface at the origin is -force
    h = 1e-6
    grad = (pot.excited_potential(np.array([h]))[0]
            - pot.excited_potential(np.array([-h]))[0]) / (2 * h)
    assert -grad == pytest.approx(NAT.force, rel=1e-8)
    lin = PotentialSpec.linearized(NAT)
    assert lin.ground_freq == 0.0
    assert np.all(lin.ground_potential(np.linspace(-3, 3, 7)) == 0.0)
    with pytest.raises(ValueError):
        PotentialSpec(ground_freq=-1.0, force=1.0)


def test_pulse_rotation_populations():
    grid = default_grid(NAT, total_time=1.0)
    st = make_ground_state(NAT, grid)
    rot = apply_impulsive_pulse(st, math.pi / 3)
    pg, pe = populations(rot)
    assert pg == pytest.approx(0.75, abs=1e-13)
    assert pe == pytest.approx(0.25, abs=1e-13)
    # 2 pi rotation is minus the identity
    full = apply_impulsive_pulse(st, 2.0 * math.pi)
    assert np.max(np.abs(full.ground + st.ground)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.0, 2.0 * math.pi), b=st.floats(0.0, 2.0 * math.pi),
       theta=st.floats(0.0, 2.0 * math.pi))
def test_pulse_composition(a, b, theta):
    # two rotations about the same axis compose by area addition
    grid = default_grid(NAT, total_time=1.0)
    st = make_ground_state(NAT, grid)
    st = apply_impulsive_pulse(st, 0.7, 0.3)  # make both components nonzero
    two = apply_impulsive_pulse(apply_impulsive_pulse(st, a, theta), b, theta)
    one = apply_impulsive_pulse(st, a + b, theta)
    assert np.max(np.abs(two.ground - one.ground)) < 1e-12
    assert np.max(np.abs(two.excited - one.excited)) < 1e-12


# ----------------------------------------------------------------------
# free benchmarks
# ----------------------------------------------------------------------

def test_harmonic_ground_state_is_stationary():
    grid = default_grid(NAT, total_time=2.0)
    pot = PotentialSpec.from_params(NAT)
    st0 = make_ground_state(NAT, grid, "position")
    st = st0
    for _ in range(500):
        st = step_split_operator(st, pot, 1e-3)
    ov = np.sum(np.conj(st0.ground) * st.ground) * grid.dx
    assert abs(abs(ov) - 1.0) < 1e-10


def test_free_packet_spreading():
    grid = default_grid(NAT, total_time=2.0)
    st = make_ground_state(NAT, grid, "position")
    free = PotentialSpec(ground_freq=0.0, force=0.0)
    for _ in range(400):
        st = step_split_operator(st, free, 2.5e-3)
    t = 400 * 2.5e-3
    x2 = float(np.sum(grid.x ** 2 * np.abs(st.ground) ** 2) * grid.dx)
    assert x2 == pytest.approx((1.0 + t * t) / 2.0, abs=1e-10)


def test_accelerated_packet_moments():
    grid = default_grid(NAT, total_time=2.0)
    pot = PotentialSpec.linearized(NAT)
    st = apply_impulsive_pulse(make_ground_state(NAT, grid, "position"), math.pi)
    for _ in range(300):
        st = step_split_operator(st, pot, 2e-3)
    t = 300 * 2e-3
    mom = st.to_momentum()
    pbar = float(np.sum(grid.p * np.abs(mom.excited) ** 2) * grid.dp)
    xbar = float(np.sum(grid.x * np.abs(st.excited) ** 2) * grid.dx)
    assert pbar == pytest.approx(NAT.force * t, abs=1e-10)
    assert xbar == pytest.approx(0.5 * NAT.force * t * t, abs=1e-10)


def test_kinetic_disabled_freezes_packets():
    grid = default_grid(NAT, total_time=2.0)
    free = PotentialSpec(ground_freq=0.0, force=0.0)
    st0 = make_ground_state(NAT, grid, "position")
    st = step_split_operator(st0, free, 0.5, kinetic_enabled=False)
    assert np.max(np.abs(st.ground - st0.ground)) < 1e-14


# ----------------------------------------------------------------------
# full runs
# ----------------------------------------------------------------------

def _echo_setup(tau, area=math.pi / 3):
    sched = PulseSchedule(t0=2 * tau, tau=tau, area1=area, area2=area)
    config = default_propagation_config(NAT, sched)
    pot = PotentialSpec.linearized(NAT)
    return sched, pot, config


def test_echo_amplitude_at_rephasing_time():
    sched, pot, config = _echo_setup(0.4)

    def run(s):
        return simulate_trace(NAT, s, pot, config)

    iso = phase_cycled_echo(run, sched)
    j = int(np.argmin(np.abs(iso.times - (sched.t0 + sched.tau))))
    assert iso.times[j] == pytest.approx(sched.t0 + sched.tau, abs=1e-12)
    want = echo_prefactor(sched) * decoherence_factor(NAT, sched.tau)
    assert abs(iso.dipole[j]) == pytest.approx(want, rel=1e-9)


def test_kinetic_off_restores_full_echo():
    tau = 0.4
    sched = PulseSchedule(t0=2 * tau, tau=tau, area1=math.pi / 3,
                          area2=math.pi / 3)
    config = default_propagation_config(NAT, sched, kinetic_enabled=False)
    pot = PotentialSpec.linearized(NAT)

    def run(s):
        return simulate_trace(NAT, s, pot, config)

    iso = phase_cycled_echo(run, sched)
    j = int(np.argmin(np.abs(iso.times - (sched.t0 + sched.tau))))
    assert abs(iso.dipole[j]) == pytest.approx(echo_prefactor(sched), rel=1e-12)


def test_isolated_echo_matches_gaussian_algebra_off_center():
    # the hard cross-check: away from the rephasing time the cross term
    # depends on the shared spreading history including the pre-pulse
    # pad, all of which the Gaussian algebra tracks exactly
    sched, pot, config = _echo_setup(0.5)

    def run(s):
        return simulate_trace(NAT, s, pot, config)

    iso = phase_cycled_echo(run, sched)
    f = NAT.force
    tau = sched.tau
    pad = sched.first_pulse_time - config.t_start
    pref = echo_prefactor(sched)
    for frac in (0.5, 1.0, 1.3):
        s_after = frac * tau
        # branch G: pad free, tau accelerated, then free in the ground
        g = _free((0.0, 0.0, 1.0), pad)
        g = _accel(g, tau, f)
        g = _free(g, s_after)
        # branch E: pad + tau free, then accelerated
        e = _free((0.0, 0.0, 1.0), pad + tau)
        e = _accel(e, s_after, f)
        want = pref * abs(_overlap(g, e))
        got = np.interp(sched.t0 + s_after, iso.times, np.abs(iso.dipole))
        assert got == pytest.approx(want, rel=1e-5), f"frac={frac}"


def test_simulate_trace_matches_manual_stepping():
    tau = 0.25
    sched = PulseSchedule(t0=2 * tau, tau=tau, area1=0.9, area2=1.3,
                          phase1=0.2, phase2=0.4)
    grid = default_grid(NAT, total_time=1.2)
    dt = tau / 25
    config = PropagationConfig(grid=grid, dt=dt, n_steps=75,
                               t_start=sched.first_pulse_time)
    pot = PotentialSpec.from_params(NAT)
    tr = simulate_trace(NAT, sched, pot, config)

    st = make_ground_state(NAT, grid, "position")
    k1, k2 = 0, 25
    for k in range(76):
        if k == k1:
            st = apply_impulsive_pulse(st, sched.area1, sched.phase1)
        if k == k2:
            st = apply_impulsive_pulse(st, sched.area2, sched.phase2)
        if k < 75:
            st = step_split_operator(st, pot, dt)
    d_final = np.sum(np.conj(st.ground) * st.excited) * grid.dx
    assert abs(tr.dipole[-1] - d_final) < 1e-12
    pg, pe = populations(st)
    assert tr.ground_pop[-1] == pytest.approx(pg, abs=1e-12)
    assert tr.excited_pop[-1] == pytest.approx(pe, abs=1e-12)


def test_norm_conserved_through_pulses_and_steps():
    sched, pot, config = _echo_setup(0.3)
    tr = simulate_trace(NAT, sched, pot, config)
    assert np.max(np.abs(tr.ground_pop + tr.excited_pop - 1.0)) < 1e-12


def test_determinism():
    sched, pot, config = _echo_setup(0.3)
    a = simulate_trace(NAT, sched, pot, config)
    b = simulate_trace(NAT, sched, pot, config)
    assert np.array_equal(a.dipole, b.dipole)
    assert np.array_equal(a.ground_pop, b.ground_pop)


def test_grid_edge_error():
    strong = PhysicalParams.natural(force=8.0)
    grid = default_grid(strong, total_time=0.15)
    sched = PulseSchedule(t0=0.2, tau=0.1, area1=math.pi, area2=0.0)
    config = PropagationConfig(grid=grid, dt=1e-3, n_steps=1500, t_start=0.1)
    pot = PotentialSpec.linearized(strong)
    with pytest.raises(GridEdgeError):
        simulate_trace(strong, sched, pot, config)


def test_pulse_must_align_with_steps():
    grid = default_grid(NAT, total_time=1.0)
    sched = PulseSchedule(t0=0.4321, tau=0.2, area1=1.0, area2=1.0)
    config = PropagationConfig(grid=grid, dt=1e-3, n_steps=800, t_start=0.0)
    pot = PotentialSpec.linearized(NAT)
    with pytest.raises(ValueError):
        simulate_trace(NAT, sched, pot, config)


def test_config_validation():
    grid = default_grid(NAT, total_time=1.0)
    with pytest.raises(ValueError):
        PropagationConfig(grid=grid, dt=-1e-3, n_steps=10, t_start=0.0)
    with pytest.raises(ValueError):
        PropagationConfig(grid=grid, dt=1e-3, n_steps=10, t_start=0.0,
                          record_stride=3)  # does not divide n_steps
    config = PropagationConfig(grid=grid, dt=1e-3, n_steps=10, t_start=0.5)
    assert config.t_end == pytest.approx(0.51, abs=1e-15)
    assert len(config.record_times()) == 11


def test_default_config_sampling_alignment():
    tau = 0.37
    sched = PulseSchedule(t0=2 * tau, tau=tau, area1=1.0, area2=1.0)
    config = default_propagation_config(NAT, sched, record_stride=4)
    times = config.record_times()
    for special in (sched.first_pulse_time, sched.t0, sched.t0 + tau):
        assert np.min(np.abs(times - special)) < 1e-9, special
    assert config.n_steps % config.record_stride == 0


def test_heuristic_dt_bounds_phase_advance():
    pot = PotentialSpec.from_params(NAT)
    dt = heuristic_dt(NAT, pot, total_time=2.0)
    p_occ = 8.0 / math.sqrt(2.0) + NAT.force * 2.0
    assert dt * 0.5 * p_occ ** 2 <= 0.5 + 1e-12


def test_convergence_gap_small():
    sched, pot, config = _echo_setup(0.2)
    assert convergence_gap(NAT, sched, pot, config) < 1e-6


def test_si_params_rejected():
    si = PhysicalParams.si(mass=1e-25, ground_freq=1e14, force=1e-8)
    sched = PulseSchedule(t0=0.4, tau=0.2, area1=1.0, area2=1.0)
    with pytest.raises(ValueError):
        default_propagation_config(si, sched)


def test_harmonic_ground_changes_late_echo():
    # with the true harmonic ground surface the echo readout at t0+tau
    # deviates from the quartic law once Omega tau is no longer small;
    # this is why scans default to the linearized surfaces
    tau = 0.629
    sched = PulseSchedule(t0=2 * tau, tau=tau, area1=math.pi / 3,
                          area2=math.pi / 3)
    config = default_propagation_config(NAT, sched,
                                        potentials=PotentialSpec.from_params(NAT))
    pot = PotentialSpec.from_params(NAT)

    def run(s):
        return simulate_trace(NAT, s, pot, config)

    iso = phase_cycled_echo(run, sched)
    j = int(np.argmin(np.abs(iso.times - (sched.t0 + tau))))
    xi = abs(iso.dipole[j]) / echo_prefactor(sched)
    assert abs(xi - decoherence_factor(NAT, tau)) / decoherence_factor(NAT, tau) > 0.05
