"""Command-line entry point: scenario configs, presets and figure-data emission.

Every subcommand reads an optional JSON config (``--config``), overlays a
bundled preset (``--preset``) underneath it and the flag overrides on top.
Unknown config keys are errors. Data go to files or standard output; log
messages go to standard error.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import analysis as an
from . import bath_kernels as bk
from . import io as qio
from .bath_kernels import BathSpec, QuadratureConfig
from .dynamics import COM_SOLVERS, ChannelKind, ChannelModel, DynamicsOptions, evolve, markovian_times
from .dynamics import squeezed_initial_state, stationary_state
from .errors import ConfigError, QBMError
from .gaussian_states import log_negativity

log = logging.getLogger("qbm_entanglement")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

LOG_GRID_START = 1e-4  # first nonzero LOG-grid time, relative to t_max

# ---------------------------------------------------------------------------
# configuration schema

DEFAULTS = {
    "model": "common_modified",
    "xi": 1.0,
    "bath": {"gamma": 0.2, "Gamma": 10.0, "T": 3.5},
    "time": {"t_max": None, "n_points": 801, "grid": "LOG"},
    "quad": {"abs_tol": 1e-10, "rel_tol": 1e-8, "max_subdivisions": 200, "omega_max_factor": 50.0},
    "dynamics": {
        "compensate_shift": False,
        "rel_eq_factor": 1.0,
        "exact_coefficients": False,
        "com_solver": "langevin",
        "rel_rotation": False,
    },
    "analysis": {"tail_window": None, "check_drift": True},
    "profile": {"T_grid": None},
    "scan": {"gamma_grid": [0.5, 1.0, 2.0, 3.0], "Gamma_grid": [1.0, 5.0, 10.0, 20.0], "n_jobs": None},
    "output": {"path": None, "format": "CSV"},
}

PRESETS = {
    "fig1": {"model": "common_modified", "xi": 1.0, "bath": {"gamma": 0.2, "Gamma": 10.0, "T": 3.5}},
    "fig2": {"model": "common_modified", "xi": 1.0, "bath": {"gamma": 0.2, "Gamma": 1.0, "T": 3.5}},
    "fig3": {"model": "common_modified", "xi": 1.0, "bath": {"gamma": 1.5, "Gamma": 10.0, "T": 1e-3}},
    "fig4": {"model": "common_modified", "xi": 1.0, "bath": {"gamma": 2.0, "Gamma": 10.0, "T": 1e-3}},
    "fig5": {
        "bath": {"gamma": 2.0, "Gamma": 10.0, "T": 0.25},
        "profile": {"T_grid": [round(0.02 * k, 10) for k in range(1, 51)]},
    },
    "fig6": {
        "bath": {"gamma": 2.0, "Gamma": 10.0, "T": 0.25},
        "scan": {
            "gamma_grid": [0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0],
            "Gamma_grid": [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
        },
    },
}

MODEL_NAMES = {k.value: k for k in ChannelKind}


def _deep_merge(base: dict, over: dict, prefix: str = "") -> dict:
    """Overlay ``over`` onto ``base``; keys absent from ``base`` are errors."""
    out = copy.deepcopy(base)
    for k, v in over.items():
        key = f"{prefix}{k}"
        if k not in base:
            raise ConfigError(key, "unknown key")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(key, "must be an object")
            out[k] = _deep_merge(base[k], v, key + ".")
        else:
            out[k] = copy.deepcopy(v)
    return out


def _number(cfg: dict, key: str, *, positive=False, nonneg=False, allow_none=False):
    node = cfg
    *path, leaf = key.split(".")
    for p in path:
        node = node[p]
    v = node[leaf]
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(key, f"must be finite, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(key, f"must be > 0, got {v!r}")
    if nonneg and not v >= 0:
        raise ConfigError(key, f"must be >= 0, got {v!r}")
    return v


def _flag(cfg: dict, key: str) -> bool:
    sec, leaf = key.split(".")
    v = cfg[sec][leaf]
    if not isinstance(v, bool):
        raise ConfigError(key, f"expected true or false, got {v!r}")
    return v


def _grid(cfg: dict, key: str, *, allow_none=False) -> list | None:
    sec, leaf = key.split(".")
    v = cfg[sec][leaf]
    if v is None and allow_none:
        return None
    if not isinstance(v, list) or not v:
        raise ConfigError(key, "expected a nonempty list of numbers")
    out = []
    for x in v:
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x) or x <= 0:
            raise ConfigError(key, f"entries must be positive numbers, got {x!r}")
        out.append(float(x))
    return out


@dataclass
class ScenarioConfig:
    """Validated run configuration."""

    model: ChannelKind
    xi: float
    gamma: float
    Gamma: float
    T: float
    t_max: float | None
    n_points: int
    grid: str
    quad: QuadratureConfig
    dynamics: DynamicsOptions
    tail_window: float | None
    check_drift: bool
    T_grid: list | None
    gamma_grid: list
    Gamma_grid: list
    n_jobs: int | None
    out_path: str | None
    out_format: str
    raw: dict = field(repr=False, default_factory=dict)

    @classmethod
    def from_dict(cls, cfg: dict) -> "ScenarioConfig":
        cfg = _deep_merge(DEFAULTS, cfg)
        model = cfg["model"]
        if not isinstance(model, str) or model.lower() not in MODEL_NAMES:
            raise ConfigError("model", f"expected one of {sorted(MODEL_NAMES)}, got {model!r}")
        xi = _number(cfg, "xi", nonneg=True)
        gamma = _number(cfg, "bath.gamma", nonneg=True)
        Gamma = _number(cfg, "bath.Gamma", positive=True)
        T = _number(cfg, "bath.T", nonneg=True)

        t_max = _number(cfg, "time.t_max", positive=True, allow_none=True)
        n = cfg["time"]["n_points"]
        if isinstance(n, bool) or not isinstance(n, int) or n < 2:
            raise ConfigError("time.n_points", f"expected an integer >= 2, got {n!r}")
        grid = cfg["time"]["grid"]
        if not isinstance(grid, str) or grid.upper() not in ("LINEAR", "LOG"):
            raise ConfigError("time.grid", f"expected LINEAR or LOG, got {grid!r}")

        q = cfg["quad"]
        for k in ("abs_tol", "rel_tol", "omega_max_factor"):
            _number(cfg, f"quad.{k}", positive=True)
        ms = q["max_subdivisions"]
        if isinstance(ms, bool) or not isinstance(ms, int) or ms < 1:
            raise ConfigError("quad.max_subdivisions", f"expected an integer >= 1, got {ms!r}")
        quad = QuadratureConfig(float(q["abs_tol"]), float(q["rel_tol"]), ms, float(q["omega_max_factor"]))

        d = cfg["dynamics"]
        solver = d["com_solver"]
        if solver not in COM_SOLVERS:
            raise ConfigError("dynamics.com_solver", f"expected one of {list(COM_SOLVERS)}, got {solver!r}")
        dyn = DynamicsOptions(
            compensate_shift=_flag(cfg, "dynamics.compensate_shift"),
            rel_eq_factor=_number(cfg, "dynamics.rel_eq_factor", positive=True),
            exact_coefficients=_flag(cfg, "dynamics.exact_coefficients"),
            com_solver=solver,
            rel_rotation=_flag(cfg, "dynamics.rel_rotation"),
        )

        tail = _number(cfg, "analysis.tail_window", positive=True, allow_none=True)
        check = _flag(cfg, "analysis.check_drift")
        T_grid = _grid(cfg, "profile.T_grid", allow_none=True)
        if T_grid is not None and any(b <= a for a, b in zip(T_grid, T_grid[1:])):
            raise ConfigError("profile.T_grid", "must be strictly ascending")
        nj = cfg["scan"]["n_jobs"]
        if nj is not None and (isinstance(nj, bool) or not isinstance(nj, int) or nj < 1):
            raise ConfigError("scan.n_jobs", f"expected an integer >= 1 or null, got {nj!r}")

        path = cfg["output"]["path"]
        if path is not None and (not isinstance(path, str) or not path):
            raise ConfigError("output.path", f"expected a file path or null, got {path!r}")
        fmt = cfg["output"]["format"]
        if not isinstance(fmt, str) or fmt.upper() not in ("CSV", "JSON"):
            raise ConfigError("output.format", f"expected CSV or JSON, got {fmt!r}")

        return cls(
            model=MODEL_NAMES[model.lower()], xi=xi, gamma=gamma, Gamma=Gamma, T=T,
            t_max=t_max, n_points=n, grid=grid.upper(), quad=quad, dynamics=dyn,
            tail_window=tail, check_drift=check, T_grid=T_grid,
            gamma_grid=_grid(cfg, "scan.gamma_grid"), Gamma_grid=_grid(cfg, "scan.Gamma_grid"),
            n_jobs=nj, out_path=path, out_format=fmt.upper(), raw=cfg,
        )

    def bath(self) -> BathSpec:
        return BathSpec(self.gamma, self.Gamma, self.T)

    def channel(self) -> ChannelModel:
        return ChannelModel(self.model, self.bath(), options=self.dynamics)

    def relaxation_rate(self) -> float:
        """Slowest relaxation rate among the model's damped channels."""
        if self.model is ChannelKind.MARKOVIAN_REFERENCE:
            return self.gamma
        model = self.channel()
        rate = bk.gamma_p_stationary(model.bath)
        if self.model is not ChannelKind.TWO_RESERVOIR:
            rate = min(rate, bk.gamma_p_stationary(model.com_bath))
        return rate

    def window(self) -> float:
        if self.tail_window is not None:
            return self.tail_window
        return an.default_tail_window(self.relaxation_rate())

    def time_grid(self) -> np.ndarray:
        t_max = self.t_max if self.t_max is not None else 2.0 * self.window()
        if self.grid == "LINEAR":
            return np.linspace(0.0, t_max, self.n_points)
        return np.concatenate(([0.0], np.geomspace(LOG_GRID_START * t_max, t_max, self.n_points - 1)))


def load_config(path: str | None, preset: str | None, overrides: dict) -> ScenarioConfig:
    """Preset, then config file, then flag overrides; validated."""
    cfg = copy.deepcopy(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError("preset", f"unknown preset {preset!r}; available: {', '.join(PRESETS)}")
        cfg = _deep_merge(cfg, PRESETS[preset])
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
        if not isinstance(user, dict):
            raise ConfigError("config", f"{path}: top level must be an object")
        cfg = _deep_merge(cfg, user)
    cfg = _deep_merge(cfg, overrides)
    return ScenarioConfig.from_dict(cfg)


# ---------------------------------------------------------------------------
# output helpers

def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        qio.atomic_write_text(path, text)
        log.info("wrote %s", path)


def _summary_path(path: str) -> str:
    root, ext = os.path.splitext(path)
    return (root if ext else path) + ".summary.json"


def _none(x):
    return "none" if x is None else x


# ---------------------------------------------------------------------------
# subcommands

def run_evolve(cfg: ScenarioConfig) -> int:
    model = cfg.channel()
    t = cfg.time_grid()
    log.info("evolving %s on %d points up to t=%.6g", model.kind.value, len(t), t[-1])
    traj = evolve(model, squeezed_initial_state(cfg.xi), t, cfg.quad)
    window = cfg.window() if cfg.check_drift else None
    ts = an.detect_time_scales(traj, window)
    summary = {
        "tau_s": _none(ts.tau_s),
        "tau_e": _none(ts.tau_e),
        "EN_inf": float(traj["EN"][-1]),
        "revival_intervals": [list(iv) for iv in ts.revival_intervals],
        "tail_drift": ts.tail_drift,
        "warnings": list(traj.warnings),
    }
    if cfg.model in (ChannelKind.COMMON_MODIFIED, ChannelKind.TWO_RESERVOIR) and cfg.gamma > 0:
        st = stationary_state(model, cfg.quad)
        summary["EN_stationary"] = log_negativity(st)
    if cfg.out_format == "JSON":
        cols = {name: [] for name in qio.TRAJECTORY_HEADER}
        for row in qio.trajectory_rows(traj):
            for name, x in zip(qio.TRAJECTORY_HEADER, row):
                cols[name].append(x)
        _emit(qio.json_text({"summary": summary, "trajectory": cols}), cfg.out_path)
        return EXIT_OK
    if cfg.out_path is not None:
        qio.write_trajectory_csv(traj, cfg.out_path)
        log.info("wrote %s", cfg.out_path)
        qio.atomic_write_text(_summary_path(cfg.out_path), qio.json_text(summary))
    sys.stdout.write(qio.json_text(summary))
    return EXIT_OK


def run_markovian(cfg: ScenarioConfig) -> int:
    if cfg.gamma <= 0:
        raise ConfigError("bath.gamma", "must be > 0 for the Markovian closed forms")
    mt = markovian_times(cfg.xi, cfg.gamma, cfg.T)
    out = {
        "tau1": "inf" if math.isinf(mt.tau1) else mt.tau1,
        "tau2": "undefined" if mt.tau2 is None else mt.tau2,
        "xi_c": mt.xi_c,
    }
    _emit(qio.json_text(out), cfg.out_path)
    return EXIT_OK


def _report_dict(rep: an.StationaryReport) -> dict:
    return {
        "gamma": rep.gamma, "Gamma": rep.Gamma, "T": rep.T,
        "r2": rep.r2, "p2R": rep.p2_R, "px2eq": rep.px2_eq,
        "ERx": rep.e_rx, "ENinf": rep.e_n_inf, "Sinf": rep.simon_s_inf, "I": rep.mutual_info,
        "integral_lhs": rep.integral_lhs, "corr_qq": rep.corr_qq, "corr_pp": rep.corr_pp,
        "entangled": rep.entangled,
    }


def _profile_row(T, rep) -> list:
    if isinstance(rep, Exception):
        return [T] + [qio.ERROR_MARK] * (len(qio.PROFILE_HEADER) - 1)
    return [T, rep.r2, rep.p2_R, rep.px2_eq, rep.e_rx, rep.e_n_inf, rep.simon_s_inf,
            rep.mutual_info, rep.corr_qq, rep.corr_pp]


def run_stationary(cfg: ScenarioConfig) -> int:
    """Single stationary report, or a temperature profile when ``profile.T_grid`` is set."""
    if cfg.gamma <= 0:
        raise ConfigError("bath.gamma", "must be > 0 for a stationary state")
    base = an.com_bath(cfg.gamma, cfg.Gamma, cfg.T)
    if cfg.T_grid is None:
        rep = an.stationary_report(base, cfg.quad)
        if cfg.out_format == "JSON":
            text = qio.json_text(_report_dict(rep))
        else:
            text = ",".join(qio.SCAN_HEADER) + "\n" + qio.format_row(qio.scan_row(cfg.gamma, cfg.Gamma, cfg.T, rep)) + "\n"
        _emit(text, cfg.out_path)
        return EXIT_OK
    reps = an.temperature_profile(base, cfg.T_grid, cfg.quad)
    failed = [r for r in reps if isinstance(r, Exception)]
    for T, r in zip(cfg.T_grid, reps):
        if isinstance(r, Exception):
            log.error("T=%g: %s", T, r)
    if cfg.out_format == "JSON":
        recs = [{"T": T, "error": str(r)} if isinstance(r, Exception) else _report_dict(r)
                for T, r in zip(cfg.T_grid, reps)]
        text = qio.json_text(recs)
    else:
        lines = [",".join(qio.PROFILE_HEADER)] + [qio.format_row(_profile_row(T, r)) for T, r in zip(cfg.T_grid, reps)]
        text = "\n".join(lines) + "\n"
    _emit(text, cfg.out_path)
    return EXIT_NUMERIC if len(failed) == len(reps) else EXIT_OK


def run_critical_temp(cfg: ScenarioConfig) -> int:
    if cfg.gamma <= 0:
        raise ConfigError("bath.gamma", "must be > 0")
    tc = an.critical_temperature(cfg.gamma, cfg.Gamma, cfg.quad)
    _emit(qio.json_text({"gamma": cfg.gamma, "Gamma": cfg.Gamma, "T_c": _none(tc)}), cfg.out_path)
    return EXIT_OK


def _completed_cells(path: str) -> dict:
    """Successful cells already in a scan CSV, keyed by ``(gamma, Gamma, T)``.

    Rows marked as failed are dropped so that they are retried, and a
    truncated final line from an interrupted run is ignored.
    """
    done = {}
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return done
    if tuple(rows[0]) != qio.SCAN_HEADER:
        raise ConfigError("--resume", f"{path} is not a scan CSV (unexpected header)")
    for k, r in enumerate(rows[1:], start=2):
        if len(r) != len(qio.SCAN_HEADER) or qio.ERROR_MARK in r:
            if len(r) != len(qio.SCAN_HEADER):
                log.warning("%s:%d: ignoring incomplete row", path, k)
            continue
        try:
            key = tuple(float(x) for x in r[:3])
            [float(x) for x in r[3:-1]]
        except ValueError:
            log.warning("%s:%d: ignoring unreadable row", path, k)
            continue
        done[key] = r
    return done


def run_scan(cfg: ScenarioConfig, resume: bool = False) -> int:
    if cfg.out_format != "CSV":
        raise ConfigError("output.format", "scan output is CSV only")
    if cfg.out_path is None and resume:
        raise ConfigError("output.path", "--resume needs an output file")
    gammas, Gammas, T = cfg.gamma_grid, cfg.Gamma_grid, cfg.T
    coords = {(g, G, T): (i, j) for i, g in enumerate(gammas) for j, G in enumerate(Gammas)}
    rows: dict = {}
    if resume and os.path.exists(cfg.out_path):
        for key, r in _completed_cells(cfg.out_path).items():
            if key not in coords:
                raise ConfigError("--resume", f"{cfg.out_path} holds cell {key} outside the configured grid")
            rows[coords[key]] = ",".join(r)
        log.info("resuming: %d of %d cells already done", len(rows), len(coords))

    n_fail = 0
    sink = None
    if cfg.out_path is not None:
        if rows:  # rewrite the kept cells so failed and truncated rows disappear
            _write_scan(cfg.out_path, rows, coords)
            sink = open(cfg.out_path, "a", newline="")
        else:
            sink = open(cfg.out_path, "w", newline="")
            sink.write(",".join(qio.SCAN_HEADER) + "\n")
            sink.flush()
    try:
        for cell in an.iter_phase_scan(gammas, Gammas, T, cfg.quad, n_jobs=cfg.n_jobs, skip=frozenset(rows)):
            if cell.report is None:
                n_fail += 1
                log.error("cell gamma=%g Gamma=%g: %s", cell.gamma, cell.Gamma, cell.error)
            line = qio.format_row(qio.scan_row(cell.gamma, cell.Gamma, T, cell.report))
            rows[(cell.i, cell.j)] = line
            if sink is not None:
                sink.write(line + "\n")
                sink.flush()
    finally:
        if sink is not None:
            sink.close()
    if cfg.out_path is not None:
        _write_scan(cfg.out_path, rows, coords)  # final file in grid order
    else:
        sys.stdout.write(_scan_text(rows, coords))
    if n_fail == len(coords):
        log.error("all %d cells failed", n_fail)
        return EXIT_NUMERIC
    return EXIT_OK


def _scan_text(rows: dict, coords: dict) -> str:
    order = sorted(coords.values())
    lines = [",".join(qio.SCAN_HEADER)] + [rows[ij] for ij in order if ij in rows]
    return "\n".join(lines) + "\n"


def _write_scan(path: str, rows: dict, coords: dict) -> None:
    qio.atomic_write_text(path, _scan_text(rows, coords))


# ---------------------------------------------------------------------------
# argument parsing

COMMANDS = {
    "evolve": run_evolve,
    "markovian": run_markovian,
    "stationary": run_stationary,
    "critical-temp": run_critical_temp,
    "scan": run_scan,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", help="JSON scenario config")
    common.add_argument("--preset", choices=sorted(PRESETS), help="bundled parameter set")
    common.add_argument("--gamma", type=float, help="coupling strength (bath.gamma)")
    common.add_argument("--Gamma", type=float, help="Drude cutoff (bath.Gamma)")
    common.add_argument("--temp", type=float, help="temperature (bath.T)")
    common.add_argument("--xi", type=float, help="initial two-mode squeezing")
    common.add_argument("--model", help="reservoir model, e.g. common_modified")
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more log output on stderr")

    p = argparse.ArgumentParser(prog="qbm-entanglement", description=__doc__.splitlines()[0],
                                allow_abbrev=False)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("evolve", parents=[common], help="time evolution and separability times")
    sub.add_parser("markovian", parents=[common], help="closed-form Markovian separability times")
    sub.add_parser("stationary", parents=[common], help="stationary report or temperature profile")
    sub.add_parser("critical-temp", parents=[common], help="critical temperature of stationary entanglement")
    sp = sub.add_parser("scan", parents=[common], help="(gamma, Gamma) phase-diagram scan")
    sp.add_argument("--resume", action="store_true", help="skip cells already completed in --out")
    sp.add_argument("--n-jobs", type=int, help="worker pool size (scan.n_jobs)")
    return p


def _overrides(args) -> dict:
    ov: dict = {}
    bath = {k: v for k, v in (("gamma", args.gamma), ("Gamma", args.Gamma), ("T", args.temp)) if v is not None}
    if bath:
        ov["bath"] = bath
    if args.xi is not None:
        ov["xi"] = args.xi
    if args.model is not None:
        ov["model"] = args.model
    if args.out is not None:
        ov["output"] = {"path": args.out}
    if getattr(args, "n_jobs", None) is not None:
        ov["scan"] = {"n_jobs": args.n_jobs}
    return ov


class _OneLine(logging.Formatter):
    def format(self, record):
        return super().format(record).replace("\n", " ")


def _setup_logging(verbosity: int) -> None:
    h = logging.StreamHandler(sys.stderr)
    h.setFormatter(_OneLine("%(levelname)s: %(message)s"))
    log.handlers[:] = [h]
    log.propagate = False
    log.setLevel(logging.WARNING - 10 * min(verbosity, 2))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        cfg = load_config(args.config, args.preset, _overrides(args))
        fn = COMMANDS[args.command]
        return fn(cfg, resume=args.resume) if args.command == "scan" else fn(cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except QBMError as exc:
        log.error("numerical failure: %s: %s", type(exc).__name__, exc)
        return EXIT_NUMERIC
    except (ValueError, ArithmeticError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
