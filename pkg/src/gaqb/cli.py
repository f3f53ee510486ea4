"""Command-line front end: single runs, parameter tables, sweeps, chiral runs.

Commands
--------
params   coupling coefficients vs theta for one topology
charge   one charging trajectory from |e_a g_b>, metrics per snapshot
sweep    theta x t grid of charging metrics plus a global-maxima summary
chiral   pitch-catch transfer run with leakage bookkeeping

Output is CSV (header row, 17-significant-digit floats, '\\n' endings,
summary as trailing '#' lines) or JSON ({"records": [...], "summary":
{...}}).  Identical configurations produce byte-identical outputs, serial
or parallel.  Exit codes: 0 success, 1 usage/config error, 2 numerical
failure.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import multiprocessing
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from .chiral import ChiralProtocol, default_grid, run_transfer
from .geometry import BUILTIN_TOPOLOGIES, CouplingLayout, closed_form_params
from .integrator import TimeGrid, evolve
from .liouville import LiouvillianSpec, SimulationError, projector
from .metrics import compute_records

SWEEP_METRICS = ("E", "ergotropy", "sigma", "power", "energy_power")


class ConfigError(Exception):
    """Bad flags, bad config file, or invalid run parameters."""


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run description shared by all commands."""

    topology: str = "braided"
    theta: float = math.pi / 2
    gamma: float = 0.1
    omega0: float = 1.0
    tmax: float = 100.0
    dt: float = 0.005
    sample_stride: int = 50
    out: Optional[str] = None
    format: str = "csv"
    # sweep grid
    theta_min: float = 0.0
    theta_max: float = 2.0 * math.pi
    theta_steps: int = 201
    metrics: str = "E,ergotropy,sigma,power"
    workers: int = 0  # 0 = number of processors
    # chiral protocol
    gamma_max: float = 0.1
    tau_scaled: float = 10.0
    direction: str = "right"


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_INT_KEYS = {"sample_stride", "theta_steps", "workers"}
_FLOAT_KEYS = {
    "theta", "gamma", "omega0", "tmax", "dt",
    "theta_min", "theta_max", "gamma_max", "tau_scaled",
}


def _parse_value(key: str, raw: str, where: str):
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{where}: value for {key!r} must be an integer, got {raw!r}")
    if key in _FLOAT_KEYS:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{where}: value for {key!r} must be a number, got {raw!r}")
    return raw


def read_config_file(path: str) -> dict:
    """Parse a line-oriented 'key = value' file; '#' starts a comment."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line.rstrip()!r}")
        key, raw = (part.strip() for part in text.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, raw, f"{path}:{lineno}")
    return values


def validate_config(cfg: RunConfig) -> RunConfig:
    if cfg.topology not in BUILTIN_TOPOLOGIES:
        raise ConfigError(f"unknown topology {cfg.topology!r}")
    if cfg.format not in ("csv", "json"):
        raise ConfigError(f"format must be 'csv' or 'json', got {cfg.format!r}")
    if cfg.direction not in ("right", "left"):
        raise ConfigError(f"direction must be 'right' or 'left', got {cfg.direction!r}")
    for name in ("theta", "gamma", "omega0", "tmax", "dt",
                 "theta_min", "theta_max", "gamma_max", "tau_scaled"):
        if not math.isfinite(getattr(cfg, name)):
            raise ConfigError(f"{name} must be finite")
    if cfg.gamma < 0:
        raise ConfigError("gamma must be >= 0")
    if cfg.omega0 <= 0 or cfg.tmax <= 0 or cfg.dt <= 0:
        raise ConfigError("omega0, tmax and dt must be positive")
    if cfg.sample_stride < 1:
        raise ConfigError("sample_stride must be >= 1")
    if cfg.theta_steps < 2:
        raise ConfigError("theta_steps must be >= 2")
    if cfg.workers < 0:
        raise ConfigError("workers must be >= 0")
    if cfg.gamma_max <= 0 or cfg.tau_scaled <= 0:
        raise ConfigError("gamma_max and tau_scaled must be positive")
    unknown = [m for m in cfg.metrics.split(",") if m.strip() not in SWEEP_METRICS]
    if unknown:
        raise ConfigError(f"unknown metrics {unknown}; choose from {SWEEP_METRICS}")
    return cfg


def load_config(path: str) -> RunConfig:
    """RunConfig from a config file alone (defaults for unset keys)."""
    return validate_config(replace(RunConfig(), **read_config_file(path)))


def merge_config(file_path: Optional[str], overrides: dict) -> tuple[RunConfig, set]:
    """defaults < config file < explicitly given flags.

    Also returns the set of keys that were explicitly set (file or flag).
    """
    values = read_config_file(file_path) if file_path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    return validate_config(replace(RunConfig(), **values)), set(values)


# ---------------------------------------------------------------------------
# output formatting

def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(stream, header, rows, summary_lines=()):
    stream.write(",".join(header) + "\n")
    for row in rows:
        stream.write(",".join(_fmt(v) for v in row) + "\n")
    for line in summary_lines:
        stream.write("# " + line + "\n")


def write_json(stream, header, rows, summary: Optional[dict] = None):
    records = [dict(zip(header, (float(v) for v in row))) for row in rows]
    payload = {"records": records}
    if summary is not None:
        payload["summary"] = summary
    stream.write(json.dumps(payload, indent=1))
    stream.write("\n")


def _emit(cfg: RunConfig, header, rows, summary: Optional[dict] = None):
    buf = io.StringIO()
    if cfg.format == "csv":
        lines = []
        if summary:
            lines = [f"{k} = {_fmt(v) if isinstance(v, float) else v}" for k, v in summary.items()]
        write_csv(buf, header, rows, lines)
    else:
        write_json(buf, header, rows, summary)
    data = buf.getvalue()
    if cfg.out is None:
        sys.stdout.write(data)
    else:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(data)


# ---------------------------------------------------------------------------
# commands

def _theta_grid(cfg: RunConfig) -> np.ndarray:
    return np.linspace(cfg.theta_min, cfg.theta_max, cfg.theta_steps)


PARAMS_HEADER = ("theta", "g_ab", "Gamma_a", "Gamma_b", "Gamma_coll", "delta_a", "delta_b")


def run_params(cfg: RunConfig):
    topo = BUILTIN_TOPOLOGIES[cfg.topology]
    rows = []
    for th in _theta_grid(cfg):
        p = closed_form_params(CouplingLayout(topo, float(th), cfg.gamma))
        rows.append((th, p.g_ab, p.Gamma_a, p.Gamma_b, p.Gamma_coll, p.delta_a, p.delta_b))
    return PARAMS_HEADER, rows


CHARGE_HEADER = ("t", "p_a", "p_b", "E", "ergotropy", "sigma", "power", "purity")


def charge_trajectory(cfg: RunConfig, theta: Optional[float] = None,
                      sample_stride: Optional[int] = None):
    """One charging run from |e_a g_b>; returns the trajectory with records."""
    topo = BUILTIN_TOPOLOGIES[cfg.topology]
    layout = CouplingLayout(topo, cfg.theta if theta is None else theta, cfg.gamma)
    spec = LiouvillianSpec(cfg.omega0, closed_form_params(layout))
    grid = TimeGrid(0.0, cfg.tmax, dt=cfg.dt,
                    sample_stride=cfg.sample_stride if sample_stride is None else sample_stride)
    traj = evolve(spec, projector("eg"), grid)
    compute_records(traj, cfg.omega0)
    return traj


def run_charge(cfg: RunConfig):
    traj = charge_trajectory(cfg)
    rows = [(r.t, r.p_a, r.p_b, r.E, r.ergotropy, r.sigma, r.power, r.purity)
            for r in traj.records]
    return CHARGE_HEADER, rows


def _sweep_cell(args):
    """One theta cell; module-level so worker processes can unpickle it."""
    theta, topology, gamma, omega0, tmax, dt, stride = args
    cfg = RunConfig(topology=topology, gamma=gamma, omega0=omega0,
                    tmax=tmax, dt=dt, sample_stride=stride)
    try:
        traj = charge_trajectory(cfg, theta=theta)
    except SimulationError as exc:
        raise SimulationError(f"sweep cell theta = {theta:.10g} failed: {exc}") from exc
    return np.array(
        [(r.t, r.E, r.ergotropy, r.sigma, r.power, r.energy_power) for r in traj.records]
    )


_CELL_COLS = {"E": 1, "ergotropy": 2, "sigma": 3, "power": 4, "energy_power": 5}


def _parabolic_peak(ts, fs, i):
    """Vertex of the parabola through three consecutive samples around i."""
    if i == 0 or i == len(fs) - 1:
        return float(ts[i]), float(fs[i])
    f0, f1, f2 = float(fs[i - 1]), float(fs[i]), float(fs[i + 1])
    denom = f0 - 2.0 * f1 + f2
    if denom >= 0.0:  # not locally concave; keep the grid sample
        return float(ts[i]), float(f1)
    shift = 0.5 * (f0 - f2) / denom
    h = float(ts[i + 1] - ts[i])
    t_peak = float(ts[i]) + shift * h
    f_peak = f1 - 0.125 * (f0 - f2) ** 2 / denom
    return t_peak, f_peak


@dataclass
class SweepResult:
    thetas: np.ndarray
    cells: list  # per-theta arrays of (t, E, ergotropy, sigma, power, energy_power)
    summary: dict


def run_sweep(cfg: RunConfig) -> SweepResult:
    """Charging metrics over the theta grid, plus refined global maxima.

    Cells are independent and computed in parallel; the output ordering is
    theta-major and identical to a serial run.  The summary holds, for each
    metric, the grid maximum refined by a dense (every-step) rerun at the
    best theta followed by three-point parabolic interpolation, and also
    the largest end-of-window battery energy (steady storage level).
    """
    thetas = _theta_grid(cfg)
    args = [(float(th), cfg.topology, cfg.gamma, cfg.omega0, cfg.tmax, cfg.dt,
             cfg.sample_stride) for th in thetas]
    workers = cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)
    if workers == 1:
        cells = [_sweep_cell(a) for a in args]
    else:
        # spawned workers start from clean interpreters; forking a process
        # whose BLAS thread pool is mid-operation can deadlock the children
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            chunk = max(1, len(args) // (4 * workers))
            cells = list(pool.map(_sweep_cell, args, chunksize=chunk))

    summary: dict = {}
    dense_cache: dict = {}

    def dense_cell(theta):
        if theta not in dense_cache:
            dense_cache[theta] = _sweep_cell(
                (theta, cfg.topology, cfg.gamma, cfg.omega0, cfg.tmax, cfg.dt, 1)
            )
        return dense_cache[theta]

    for name, col in _CELL_COLS.items():
        best_v, best_th, best_t = -math.inf, 0.0, 0.0
        for th, cell in zip(thetas, cells):
            i = int(np.argmax(cell[:, col]))
            if cell[i, col] > best_v:
                best_v, best_th, best_t = float(cell[i, col]), float(th), float(cell[i, 0])
        dense = dense_cell(best_th)
        j = int(np.argmax(dense[:, col]))
        t_peak, f_peak = _parabolic_peak(dense[:, 0], dense[:, col], j)
        summary[f"max_{name}"] = f_peak
        summary[f"argmax_{name}_theta"] = best_th
        summary[f"argmax_{name}_t"] = t_peak

    # steady storage level: battery energy at the end of the window
    end_v, end_th = -math.inf, 0.0
    for th, cell in zip(thetas, cells):
        if cell[-1, 1] > end_v:
            end_v, end_th = float(cell[-1, 1]), float(th)
    summary["max_E_end"] = end_v
    summary["argmax_E_end_theta"] = end_th
    return SweepResult(thetas=thetas, cells=cells, summary=summary)


def run_chiral(cfg: RunConfig, tmax_explicit: bool = False):
    protocol = ChiralProtocol(
        gamma_max=cfg.gamma_max,
        tau=cfg.tau_scaled / cfg.gamma_max,
        theta=cfg.theta,
        direction=cfg.direction,
    )
    if tmax_explicit:  # explicit window overrides the 3*tau default
        stride = max(1, round(cfg.tmax / cfg.dt / 600))
        grid = TimeGrid(0.0, cfg.tmax, dt=cfg.dt, sample_stride=stride)
    else:
        grid = default_grid(protocol, dt=cfg.dt)
    traj, s = run_transfer(protocol, grid=grid, omega0=cfg.omega0)
    rows = [
        (r.t, r.p_a, r.p_b, r.E, r.ergotropy, r.sigma, r.power, r.purity, float(lk))
        for r, lk in zip(traj.records, traj.aux)
    ]
    summary = {
        "final_battery_energy": s.final_battery_energy,
        "final_charger_energy": s.final_charger_energy,
        "leakage": s.leakage,
        "efficiency": s.efficiency,
    }
    return CHARGE_HEADER + ("leakage",), rows, summary


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors must exit 1, not argparse's 2
        raise ConfigError(message)


def _add_shared(p: _Parser):
    p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--topology", choices=sorted(BUILTIN_TOPOLOGIES))
    p.add_argument("--theta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--omega0", type=float)
    p.add_argument("--tmax", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--stride", type=int, dest="sample_stride")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=("csv", "json"))


def build_parser() -> _Parser:
    parser = _Parser(prog="gaqb", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="coupling coefficients vs theta")
    _add_shared(p)
    p.add_argument("--theta-min", type=float, dest="theta_min")
    p.add_argument("--theta-max", type=float, dest="theta_max")
    p.add_argument("--theta-steps", type=int, dest="theta_steps")

    p = sub.add_parser("charge", help="single charging trajectory")
    _add_shared(p)

    p = sub.add_parser("sweep", help="theta x t metric grid with summary")
    _add_shared(p)
    p.add_argument("--theta-min", type=float, dest="theta_min")
    p.add_argument("--theta-max", type=float, dest="theta_max")
    p.add_argument("--theta-steps", type=int, dest="theta_steps")
    p.add_argument("--metrics")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("chiral", help="pitch-catch transfer run")
    _add_shared(p)
    p.add_argument("--gamma-max", type=float, dest="gamma_max")
    p.add_argument("--tau-scaled", type=float, dest="tau_scaled")
    p.add_argument("--direction", choices=("right", "left"))

    return parser


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        overrides = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
        cfg, explicit = merge_config(ns.config, overrides)
        if ns.command == "params":
            header, rows = run_params(cfg)
            _emit(cfg, header, rows)
        elif ns.command == "charge":
            header, rows = run_charge(cfg)
            _emit(cfg, header, rows)
        elif ns.command == "sweep":
            result = run_sweep(cfg)
            chosen = [m.strip() for m in cfg.metrics.split(",")]
            header = ("theta", "t") + tuple(chosen)
            cols = [_CELL_COLS[m] for m in chosen]
            rows = []
            for th, cell in zip(result.thetas, result.cells):
                for row in cell:
                    rows.append((th, row[0], *(row[c] for c in cols)))
            _emit(cfg, header, rows, result.summary)
        else:
            header, rows, summary = run_chiral(cfg, tmax_explicit="tmax" in explicit)
            _emit(cfg, header, rows, summary)
        return 0
    except ConfigError as exc:
        print(f"gaqb: error: {exc}", file=sys.stderr)
        return 1
    except SimulationError as exc:
        print(f"gaqb: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
