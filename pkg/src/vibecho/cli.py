"""Command line front end: deterministic CSV traces and JSON reports.

Commands
    run       dipole trace for one two-pulse schedule -> trace.csv
    scan-tau  echo amplitude against pulse delay -> scan.csv + fit.json
    compare   closed forms against the grid engine -> compare.json
    params    timescale report on standard output

Configuration is a flat JSON object; command line flags override file
values, unknown keys are rejected.  Times in the config and in the
outputs are in the declared unit system (seconds for "si", Omega * t
for "natural"); the conversion to the natural units the engines use
happens here and only here.  Every run also writes
effective_config.json, the fully resolved configuration, which parses
back into an identical run.

All output is locale independent: newline "\\n", decimal point ".",
scientific notation with 12 digits after the point.  Files are written
atomically (temporary file plus rename), and identical configurations
produce byte-identical files.  Exit codes: 0 success, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analytic import (
    analytic_dipole_trace,
    decoherence_time,
    dephasing_time,
    timescale_ratio,
)
from .core import (
    DipoleTrace,
    GridTooNarrowError,
    PhysicalParams,
    PulseSchedule,
)
from .propagator import (
    GridEdgeError,
    PotentialSpec,
    default_propagation_config,
    simulate_trace,
)
from .scans import (
    EchoScan,
    FitRangeError,
    compare_analytic_numeric,
    fit_quartic_decay,
    phase_cycled_echo,
    tau_scan,
)

__all__ = ["ConfigError", "RunConfig", "main"]

_DEFAULT_AREA = math.pi / 3.0


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


_KNOWN_KEYS = {
    "units", "force", "mass", "ground_freq", "gap",
    "t0", "tau", "area1", "area2", "phase1", "phase2",
    "engine", "pathway", "ground_potential",
    "n_points", "dt", "safety", "record_stride", "t_end", "kinetic_enabled",
    "tau_values", "pulse_area",
    "out",
}

_CHOICES = {
    "units": ("natural", "si"),
    "engine": ("numeric", "analytic"),
    "pathway": ("total", "echo"),
    "ground_potential": ("linearized", "harmonic"),
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration of one command invocation."""

    units: str
    force: float
    mass: float | None
    ground_freq: float | None
    gap: float
    t0: float | None
    tau: float | None
    area1: float
    area2: float
    phase1: float
    phase2: float
    engine: str
    pathway: str
    ground_potential: str
    n_points: int
    dt: float | None
    safety: float
    record_stride: int
    t_end: float | None
    kinetic_enabled: bool
    tau_values: tuple | None
    pulse_area: float
    out: str

    def params(self) -> PhysicalParams:
        if self.units == "si":
            return PhysicalParams.si(mass=self.mass, ground_freq=self.ground_freq,
                                     force=self.force, gap=self.gap)
        return PhysicalParams.natural(force=self.force, gap=self.gap)

    @property
    def time_unit(self) -> float:
        """Natural time units per configured time unit (Omega for si)."""
        return self.ground_freq if self.units == "si" else 1.0

    def schedule_natural(self) -> PulseSchedule:
        if self.tau is None:
            raise ConfigError("this command needs 'tau' in the configuration")
        w = self.time_unit
        t0 = self.t0 if self.t0 is not None else 2.0 * self.tau
        return PulseSchedule(t0=w * t0, tau=w * self.tau,
                             area1=self.area1, area2=self.area2,
                             phase1=self.phase1, phase2=self.phase2)

    def to_dict(self) -> dict:
        d = {
            "units": self.units,
            "force": self.force,
            "gap": self.gap,
            "area1": self.area1,
            "area2": self.area2,
            "phase1": self.phase1,
            "phase2": self.phase2,
            "engine": self.engine,
            "pathway": self.pathway,
            "ground_potential": self.ground_potential,
            "n_points": self.n_points,
            "safety": self.safety,
            "record_stride": self.record_stride,
            "kinetic_enabled": self.kinetic_enabled,
            "pulse_area": self.pulse_area,
            "out": self.out,
        }
        if self.units == "si":
            d["mass"] = self.mass
            d["ground_freq"] = self.ground_freq
        for key in ("t0", "tau", "dt", "t_end"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v
        if self.tau_values is not None:
            d["tau_values"] = list(self.tau_values)
        return d


def _expect(cfg: dict, key: str, kinds, default=None, required=False):
    if key not in cfg:
        if required:
            raise ConfigError(f"missing required config key '{key}'")
        return default
    v = cfg[key]
    if isinstance(v, bool) and bool not in (kinds if isinstance(kinds, tuple) else (kinds,)):
        raise ConfigError(f"config key '{key}' has wrong type (got boolean)")
    if not isinstance(v, kinds):
        raise ConfigError(f"config key '{key}' has wrong type")
    return v


def _expect_number(cfg: dict, key: str, default=None, required=False,
                   positive=False, nonnegative=False):
    v = _expect(cfg, key, (int, float), default=default, required=required)
    if v is None:
        return None
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"config key '{key}' must be finite")
    if positive and v <= 0.0:
        raise ConfigError(f"config key '{key}' must be positive")
    if nonnegative and v < 0.0:
        raise ConfigError(f"config key '{key}' must be nonnegative")
    return v


def parse_config(raw: dict) -> RunConfig:
    """Validate a flat JSON mapping and resolve all defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(raw) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for key, choices in _CHOICES.items():
        v = raw.get(key)
        if v is not None and v not in choices:
            raise ConfigError(
                f"config key '{key}' must be one of {', '.join(choices)}")

    units = _expect(raw, "units", str, default="natural")
    force = _expect_number(raw, "force", required=True, nonnegative=True)
    mass = _expect_number(raw, "mass", positive=True)
    ground_freq = _expect_number(raw, "ground_freq", positive=True)
    if units == "si":
        if mass is None or ground_freq is None:
            raise ConfigError("si units need 'mass' and 'ground_freq'")
    else:
        for key in ("mass", "ground_freq"):
            if raw.get(key) not in (None, 1, 1.0):
                raise ConfigError(f"'{key}' has no meaning in natural units")
        mass = ground_freq = None

    tau = _expect_number(raw, "tau", positive=True)
    t0 = _expect_number(raw, "t0")
    area1 = _expect_number(raw, "area1", default=_DEFAULT_AREA)
    area2 = _expect_number(raw, "area2", default=area1)
    tau_values = _expect(raw, "tau_values", (list, tuple))
    if tau_values is not None:
        vals = []
        for v in tau_values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError("'tau_values' must be a list of numbers")
            v = float(v)
            if not (math.isfinite(v) and v > 0.0):
                raise ConfigError("'tau_values' entries must be positive")
            vals.append(v)
        if not vals:
            raise ConfigError("'tau_values' must not be empty")
        tau_values = tuple(vals)

    n_points = _expect(raw, "n_points", int, default=4096)
    if n_points < 8 or n_points % 2:
        raise ConfigError("'n_points' must be an even integer >= 8")
    record_stride = _expect(raw, "record_stride", int, default=1)
    if record_stride < 1:
        raise ConfigError("'record_stride' must be >= 1")

    return RunConfig(
        units=units,
        force=force,
        mass=mass,
        ground_freq=ground_freq,
        gap=_expect_number(raw, "gap", default=0.0, nonnegative=True),
        t0=t0,
        tau=tau,
        area1=area1,
        area2=area2,
        phase1=_expect_number(raw, "phase1", default=0.0),
        phase2=_expect_number(raw, "phase2", default=0.0),
        engine=_expect(raw, "engine", str, default="numeric"),
        pathway=_expect(raw, "pathway", str, default="total"),
        ground_potential=_expect(raw, "ground_potential", str,
                                 default="linearized"),
        n_points=n_points,
        dt=_expect_number(raw, "dt", positive=True),
        safety=_expect_number(raw, "safety", default=8.0, positive=True),
        record_stride=record_stride,
        t_end=_expect_number(raw, "t_end"),
        kinetic_enabled=_expect(raw, "kinetic_enabled", bool, default=True),
        tau_values=tau_values,
        pulse_area=_expect_number(raw, "pulse_area", default=_DEFAULT_AREA),
        out=_expect(raw, "out", str, default="."),
    )


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """Read the JSON file (if any), apply flag overrides, validate."""
    raw: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        raw = dict(raw)
    for key, value in overrides.items():
        if value is not None:
            raw[key] = value
    return parse_config(raw)


# ----------------------------------------------------------------------
# output helpers
# ----------------------------------------------------------------------

def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _fmt(x: float) -> str:
    return f"{x:.12e}"


def _trace_csv(trace: DipoleTrace, time_scale: float) -> str:
    lines = ["t,re_d,im_d,abs_d,ground_pop,excited_pop"]
    for i in range(len(trace.times)):
        d = trace.dipole[i]
        lines.append(",".join((
            _fmt(trace.times[i] / time_scale),
            _fmt(d.real), _fmt(d.imag), _fmt(abs(d)),
            _fmt(trace.ground_pop[i]), _fmt(trace.excited_pop[i]),
        )))
    return "\n".join(lines) + "\n"


def _scan_csv(scan: EchoScan, time_scale: float) -> str:
    lines = ["tau,peak,xi,xi_analytic"]
    for i in range(len(scan.tau)):
        lines.append(",".join((
            _fmt(scan.tau[i] / time_scale),
            _fmt(scan.peak[i]), _fmt(scan.xi[i]), _fmt(scan.xi_analytic[i]),
        )))
    return "\n".join(lines) + "\n"


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(config: RunConfig, name: str, text: str) -> None:
    path = os.path.join(config.out, name)
    _write_atomic(path, text)
    print(f"wrote {path}")


def _emit_effective_config(config: RunConfig) -> None:
    _emit(config, "effective_config.json", _json_text(config.to_dict()))


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------

def _numeric_trace(config: RunConfig, nat: PhysicalParams,
                   schedule: PulseSchedule) -> DipoleTrace:
    w = config.time_unit
    if config.ground_potential == "harmonic":
        potentials = PotentialSpec.from_params(nat)
    else:
        potentials = PotentialSpec.linearized(nat)
    prop_config = default_propagation_config(
        nat, schedule, potentials=potentials, n_points=config.n_points,
        dt=None if config.dt is None else w * config.dt,
        t_end=None if config.t_end is None else w * config.t_end,
        record_stride=config.record_stride, safety=config.safety,
        kinetic_enabled=config.kinetic_enabled)

    def run(s: PulseSchedule) -> DipoleTrace:
        return simulate_trace(nat, s, potentials, prop_config)

    if config.pathway == "echo":
        return phase_cycled_echo(run, schedule)
    return run(schedule)


def cmd_run(config: RunConfig) -> int:
    """Write the dipole trace of one schedule as trace.csv."""
    nat = config.params().to_natural()
    schedule = config.schedule_natural()
    if config.engine == "numeric":
        trace = _numeric_trace(config, nat, schedule)
    else:
        w = config.time_unit
        prop_config = default_propagation_config(
            nat, schedule, n_points=config.n_points,
            dt=None if config.dt is None else w * config.dt,
            t_end=None if config.t_end is None else w * config.t_end,
            record_stride=config.record_stride, safety=config.safety)
        trace = analytic_dipole_trace(nat, schedule, prop_config.record_times(),
                                      include_decoherence=True,
                                      pathway=config.pathway)
    _emit(config, "trace.csv", _trace_csv(trace, config.time_unit))
    _emit_effective_config(config)
    return 0


def cmd_scan_tau(config: RunConfig) -> int:
    """Scan the delay, write scan.csv and the decay-fit report."""
    if config.tau_values is None:
        raise ConfigError("scan-tau needs 'tau_values' in the configuration")
    nat = config.params().to_natural()
    w = config.time_unit
    taus_nat = [w * t for t in config.tau_values]
    rows = []
    failures = []
    for tau in taus_nat:
        try:
            part = tau_scan(nat, config.pulse_area, [tau],
                            engine=config.engine, n_points=config.n_points,
                            safety=config.safety,
                            kinetic_enabled=config.kinetic_enabled)
            rows.append((tau, float(part.peak[0]), float(part.xi[0]),
                         float(part.xi_analytic[0])))
        except (GridEdgeError, GridTooNarrowError, ValueError,
                RuntimeError, ArithmeticError) as exc:
            failures.append({"tau": tau / w, "error": str(exc)})
    if not rows:
        raise RuntimeError("every scan point failed; see the fit report "
                           "failures for details")
    scan = EchoScan(
        tau=np.array([r[0] for r in rows]),
        peak=np.array([r[1] for r in rows]),
        xi=np.array([r[2] for r in rows]),
        xi_analytic=np.array([r[3] for r in rows]),
        pulse_area=config.pulse_area, engine=config.engine)
    report: dict = {"engine": config.engine, "units": config.units,
                    "n_points_scanned": len(rows), "failures": failures}
    try:
        fit = fit_quartic_decay(scan)
        report.update(exponent=fit.exponent, T_fit=fit.decay_time / w,
                      residual=fit.residual, n_used=fit.n_used)
    except FitRangeError as exc:
        report.update(exponent=None, T_fit=None, residual=None, n_used=0,
                      fit_error=str(exc))
    _emit(config, "scan.csv", _scan_csv(scan, w))
    _emit(config, "fit.json", _json_text(report))
    _emit_effective_config(config)
    return 0


def cmd_compare(config: RunConfig) -> int:
    """Run both engines on one schedule, write the error report."""
    nat = config.params().to_natural()
    schedule = config.schedule_natural()
    if config.ground_potential == "harmonic":
        potentials = PotentialSpec.from_params(nat)
    else:
        potentials = PotentialSpec.linearized(nat)
    w = config.time_unit
    prop_config = default_propagation_config(
        nat, schedule, potentials=potentials, n_points=config.n_points,
        dt=None if config.dt is None else w * config.dt,
        t_end=None if config.t_end is None else w * config.t_end,
        record_stride=config.record_stride, safety=config.safety,
        kinetic_enabled=config.kinetic_enabled)
    rep = compare_analytic_numeric(nat, schedule, potentials=potentials,
                                   config=prop_config)
    body = {
        "units": "natural",
        "sup_norm_error": rep.sup_norm_error,
        "l2_error": rep.l2_error,
        "echo_peak_time_error": rep.echo_peak_time_error,
        "echo_peak_magnitude_error": rep.echo_peak_magnitude_error,
        "max_amplitude": rep.max_amplitude,
        "dt": rep.dt,
        "omega_t_total": rep.omega_t_total,
        "shift_ratio": rep.shift_ratio,
    }
    _emit(config, "compare.json", _json_text(body))
    _emit_effective_config(config)
    return 0


def _params_block(label: str, delta_p: float, t_phi: float, t_dec: float,
                  tau_lo: float, tau_hi: float, time_suffix: str,
                  dp_suffix: str) -> list[str]:
    lines = [f"  {label}:"]
    lines.append(f"    delta_p           = {_fmt(delta_p)}{dp_suffix}")
    for name, value in (("t_phi", t_phi), ("T", t_dec)):
        text = "inf" if math.isinf(value) else _fmt(value) + time_suffix
        lines.append(f"    {name:<17} = {text}")
    if math.isinf(t_dec):
        lines.append("    suggested tau range: none (echo never decays)")
    else:
        lines.append(f"    suggested tau range: [{_fmt(tau_lo)}, "
                     f"{_fmt(tau_hi)}]{time_suffix}")
    return lines


def cmd_params(config: RunConfig) -> int:
    """Print the timescale report in both unit systems."""
    params = config.params()
    nat = params.to_natural()
    f = nat.force
    lines = [f"parameter summary ({config.units} input)"]
    lines.append(f"  dimensionless force f = {_fmt(f)}")
    lines.append("  T / t_phi         = "
                 + ("undefined" if f == 0.0 else _fmt(timescale_ratio(nat))))
    t_nat = decoherence_time(nat)
    if config.units == "si":
        t_si = decoherence_time(params)
        lines += _params_block("si units", params.delta_p,
                               dephasing_time(params), t_si,
                               0.25 * t_si, t_si, " s", " kg m/s")
    lines += _params_block("natural units (Omega t)", nat.delta_p,
                           dephasing_time(nat), t_nat,
                           0.25 * t_nat, t_nat, "", "")
    if f == 0.0:
        lines.append("warning: zero force; the excited surface is not "
                     "displaced, so the dipole never dephases and no echo "
                     "decay can be observed")
    else:
        lines.append("  (suggested range spans xi from about 0.996 down to 1/e)")
    print("\n".join(lines))
    return 0


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="flat JSON configuration file")
    common.add_argument("--out", metavar="DIR",
                        help="output directory (default: current)")
    common.add_argument("--engine", choices=("analytic", "numeric"),
                        help="closed forms or grid propagation")
    common.add_argument("--units", choices=("si", "natural"),
                        help="unit system of config values and outputs")
    parser = argparse.ArgumentParser(
        prog="vibecho",
        description="two-pulse vibrational photon echo simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common],
                   help="write the dipole trace of one pulse schedule")
    sub.add_parser("scan-tau", parents=[common],
                   help="scan the pulse delay and fit the echo decay")
    sub.add_parser("compare", parents=[common],
                   help="measure numeric against analytic on one schedule")
    sub.add_parser("params", parents=[common],
                   help="report dephasing and decoherence timescales")
    return parser


_COMMANDS = {
    "run": cmd_run,
    "scan-tau": cmd_scan_tau,
    "compare": cmd_compare,
    "params": cmd_params,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config, {
            "out": args.out, "engine": args.engine, "units": args.units,
        })
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (GridEdgeError, GridTooNarrowError, FitRangeError, ValueError,
            RuntimeError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
