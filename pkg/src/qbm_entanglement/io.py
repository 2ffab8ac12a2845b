"""CSV and JSON emission of trajectories, scans and summaries.

Numbers are written as the shortest decimal that round-trips to the same
double (``repr``), which always carries at least the 9 significant digits
needed for the data contract.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile

import numpy as np

from .gaussian_states import CovarianceMatrix

# upper-triangle entries of V in (q1, p1, q2, p2) order
V_COLUMNS = ("Vqq1", "Vq1p1", "Vq1q2", "Vq1p2", "Vp1p1", "Vp1q2", "Vp1p2", "Vq2q2", "Vq2p2", "Vp2p2")
V_INDEX = tuple((i, j) for i in range(4) for j in range(i, 4))
TRAJECTORY_HEADER = ("t", "EN", "S", "mu", "mu1", "mu2", "I", "nu_tilde_minus") + V_COLUMNS


def format_number(x) -> str:
    """Shortest round-trip decimal; ``inf``, ``-inf`` and ``nan`` spelled out."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def parse_number(s: str) -> float:
    return float(s)


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` via a temporary file in the same directory."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _rows_to_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(format_number(x) if not isinstance(x, str) else x for x in r) for r in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# trajectories

def trajectory_rows(traj):
    for k, t in enumerate(traj.times):
        v = traj.states[k].v
        row = [t] + [traj.diagnostics[n][k] for n in TRAJECTORY_HEADER[1:8]]
        row += [v[i, j] for i, j in V_INDEX]
        yield row


def trajectory_csv_text(traj) -> str:
    return _rows_to_text(TRAJECTORY_HEADER, trajectory_rows(traj))


def write_trajectory_csv(traj, path) -> None:
    atomic_write_text(path, trajectory_csv_text(traj))


def read_trajectory_csv(path):
    """Read a trajectory CSV written by :func:`write_trajectory_csv`.

    Diagnostics are taken from the file, not recomputed.
    """
    from .dynamics import DIAGNOSTIC_NAMES, Trajectory

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TRAJECTORY_HEADER:
            raise ValueError(f"unexpected trajectory header {header!r}")
        rows = [[parse_number(x) for x in r] for r in reader if r]
    data = np.array(rows, dtype=float).reshape(-1, len(TRAJECTORY_HEADER))
    states = []
    for r in data:
        v = np.zeros((4, 4))
        for (i, j), x in zip(V_INDEX, r[8:]):
            v[i, j] = v[j, i] = x
        states.append(CovarianceMatrix(v))
    diag = {n: data[:, 1 + k].copy() for k, n in enumerate(DIAGNOSTIC_NAMES)}
    return Trajectory(data[:, 0].copy(), states, diag)


# ---------------------------------------------------------------------------
# scans and temperature profiles

SCAN_HEADER = ("gamma", "Gamma", "T", "r2", "p2R", "px2eq", "ERx", "ENinf", "Sinf", "I", "entangled")
PROFILE_HEADER = ("T", "r2", "p2R", "px2eq", "ERx", "ENinf", "Sinf", "I", "corr_qq", "corr_pp")
ERROR_MARK = "error"


def scan_row(gamma, Gamma, T, report) -> list:
    """One scan line; a failed cell keeps its coordinates and marks the rest ``error``."""
    if report is None or isinstance(report, Exception):
        return [gamma, Gamma, T] + [ERROR_MARK] * (len(SCAN_HEADER) - 3)
    return [gamma, Gamma, T, report.r2, report.p2_R, report.px2_eq, report.e_rx,
            report.e_n_inf, report.simon_s_inf, report.mutual_info, bool(report.entangled)]


def format_row(row) -> str:
    return ",".join(x if isinstance(x, str) else format_number(x) for x in row)


def read_scan_csv(path) -> list[dict]:
    """Rows of a scan CSV as dicts; failed cells carry ``None`` values."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != SCAN_HEADER:
            raise ValueError(f"unexpected scan header {header!r}")
        out = []
        for r in reader:
            if not r:
                continue
            if len(r) != len(SCAN_HEADER):
                raise ValueError(f"malformed scan row {r!r}")
            rec = {}
            for k, x in zip(SCAN_HEADER, r):
                if x == ERROR_MARK:
                    rec[k] = None
                elif k == "entangled":
                    rec[k] = x == "true"
                else:
                    rec[k] = parse_number(x)
            out.append(rec)
    return out


def read_profile_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != PROFILE_HEADER:
            raise ValueError(f"unexpected profile header {header!r}")
        return [{k: (None if x == ERROR_MARK else parse_number(x)) for k, x in zip(PROFILE_HEADER, r)}
                for r in reader if r]


# ---------------------------------------------------------------------------
# JSON

def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
