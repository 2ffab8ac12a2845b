"""Derived diagnostics: separability and re-entangling times, the stationary
EPR witness, critical temperatures and (gamma, Gamma) phase scans.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from . import bath_kernels as bk
from .bath_kernels import DEFAULT_QUAD, BathSpec, QuadratureConfig
from .dynamics import NormalModeState, SingleModeMoments, Trajectory
from .errors import NoBracketError, NotConvergedError, QBMError
from .gaussian_states import (
    CovarianceMatrix,
    mutual_information,
    simon_criterion,
    symplectic_spectrum,
    _log_neg_from_nu,
)

log = logging.getLogger(__name__)

# scans call a state entangled only below this margin on nu~_minus
ENTANGLEMENT_MARGIN = 1e-9
# 1/16 - <R^2><p_x^2> below which E_Rx is reported as zero; matches the margin
E_RX_FLOOR = 0.5 * 0.5 * ENTANGLEMENT_MARGIN
DRIFT_TOL = 1e-4
TIME_TOL = 1e-6
T_SEARCH = (1e-6, 1e2)
T_PROBES = 40
T_REL_TOL = 1e-4


# ---------------------------------------------------------------------------
# time scales

@dataclass(frozen=True)
class TimeScales:
    """Separability time, re-entangling time and all entangled intervals.

    ``revival_intervals`` lists every ``(t_start, t_end)`` with E_N > 0,
    including the initial one; an interval still open at the end of the
    trajectory ends at the last sample time.
    """

    tau_s: float | None
    tau_e: float | None
    revival_intervals: list = field(default_factory=list)
    tail_drift: float = 0.0


def default_tail_window(gamma_p_inf: float) -> float:
    return 20.0 / max(gamma_p_inf, 1e-3)


def tail_drift(traj: Trajectory, window: float, names=("EN", "mu", "nu_tilde_minus")) -> float:
    """Largest relative spread of the diagnostics over the final ``window``."""
    t = traj.times
    if t[-1] - t[0] < window:
        return math.inf
    sel = t >= t[-1] - window
    worst = 0.0
    for n in names:
        d = np.asarray(traj[n])[sel]
        ref = max(abs(d[-1]), 1e-6)
        worst = max(worst, float(np.max(d) - np.min(d)) / ref)
    return worst


def _gap(cov: CovarianceMatrix) -> float:
    """``nu~_minus - 1/2``: negative exactly when the state is PPT-entangled."""
    return symplectic_spectrum(cov, tol=1e-3).nu_tilde_minus - 0.5


def _refine(f: Callable[[float], float], a: float, b: float, fa: float, tol: float) -> float:
    """Bisection for the sign change of ``f`` on ``[a, b]``; returns the entangled-side edge.

    ``fa`` is ``f(a)``. The returned time is within ``tol`` of the crossing.
    """
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = f(m)
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def detect_time_scales(traj: Trajectory, tail_window: float | None = None,
                       drift_tol: float = DRIFT_TOL, time_tol: float = TIME_TOL) -> TimeScales:
    """Locate sign changes of ``nu~_minus - 1/2`` along a trajectory.

    Crossings found on the sample grid are refined by bisection on the
    trajectory's sampler (linear interpolation of the gap when it has none).

    Raises:
        NotConvergedError: the diagnostics drift by more than ``drift_tol``
            over the final ``tail_window``.
    """
    t = traj.times
    gaps = np.asarray(traj["nu_tilde_minus"]) - 0.5
    drift = 0.0
    if tail_window is not None:
        drift = tail_drift(traj, tail_window)
        if drift > drift_tol:
            raise NotConvergedError(
                f"tail drift {drift:.3g} over window {tail_window:.6g} exceeds {drift_tol:g}"
            )
    ent = gaps < 0

    def refine(k: int) -> float:
        a, b = float(t[k]), float(t[k + 1])
        if traj.sampler is not None:
            return _refine(lambda s: _gap(traj.state_at(s)), a, b, float(gaps[k]), time_tol)
        ga, gb = gaps[k], gaps[k + 1]
        return a + (b - a) * ga / (ga - gb)

    crossings = []  # (time, becomes_entangled)
    for k in range(len(t) - 1):
        if ent[k] != ent[k + 1]:
            crossings.append((refine(k), bool(ent[k + 1])))

    intervals = []
    start = float(t[0]) if ent[0] else None
    for tc, up in crossings:
        if up:
            start = tc
        elif start is not None:
            intervals.append((start, tc))
            start = None
    if start is not None:
        intervals.append((start, float(t[-1])))

    downs = [tc for tc, up in crossings if not up]
    if ent[0]:
        tau_s = downs[0] if downs else None
    else:
        tau_s = float(t[0])
    tau_e = None
    if ent[-1] and tau_s is not None:
        tau_e = intervals[-1][0]
    return TimeScales(tau_s, tau_e, intervals, drift)


# ---------------------------------------------------------------------------
# stationary state of the common reservoir

@dataclass(frozen=True)
class StationaryReport:
    """Stationary common-reservoir state at one (gamma, Gamma, T).

    ``e_rx = max(1/16 - r2 px2_eq, 0)`` (values below :data:`E_RX_FLOOR`
    count as zero) and ``entangled`` is ``e_rx > 0``.
    """

    gamma: float
    Gamma: float
    T: float
    r2: float
    p2_R: float
    px2_eq: float
    e_rx: float
    e_n_inf: float
    integral_lhs: float
    entangled: bool
    simon_s_inf: float
    mutual_info: float
    nu_tilde_minus: float
    corr_qq: float
    corr_pp: float
    cov: CovarianceMatrix = field(repr=False, compare=False)


def _check_com_bath(bath: BathSpec):
    if bath.gamma <= 0:
        raise ValueError("stationary analysis needs gamma > 0")


def relative_momentum_eq(bath: BathSpec) -> float:
    """``<p_x^2>_eq = mu w0 (2 nbar + 1)/2`` with reduced mass ``mu = M/4``."""
    return 0.25 * bath.mass * bath.omega0 * (2.0 * bath.nbar + 1.0) / 2.0


def criterion_integral(bath: BathSpec, qc: QuadratureConfig = DEFAULT_QUAD) -> float:
    """Direct quadrature of the stationary criterion in integral form.

    ``(M w0 / 2pi) int (2 nbar + 1) coth(w/2T) Im chi(w) dw``, which equals
    ``4 <R^2><p_x^2>_eq`` (``<R^2>(2 nbar + 1)`` for M = 2, w0 = 1). The
    stationary state is entangled iff it is below 1/4.
    """
    thermal = 2.0 * bath.nbar + 1.0
    scale = 0.5 * bath.mass * bath.omega0 * thermal
    f = lambda w: scale * bk._fluct_weight(w, bath)  # noqa: E731
    return bk._fluct_integral(f, bath, qc, "criterion integral")


def stationary_report(bath: BathSpec, qc: QuadratureConfig = DEFAULT_QUAD) -> StationaryReport:
    """Stationary moments and entanglement witnesses; ``bath.mass`` is the center-of-mass mass M."""
    _check_com_bath(bath)
    r2, p2 = bk.stationary_R_moments(bath, qc)
    px2 = relative_momentum_eq(bath)
    mu = 0.25 * bath.mass
    xx = (2.0 * bath.nbar + 1.0) / (2.0 * mu * bath.omega0)
    nm = NormalModeState(SingleModeMoments(r2, 0.0, p2), xx, px2, 0.0)
    cov = nm.reconstruct_covariance()
    spec = symplectic_spectrum(cov)
    e_rx = 1.0 / 16.0 - r2 * px2
    e_rx = e_rx if e_rx > E_RX_FLOOR else 0.0
    lhs = criterion_integral(bath, qc)
    return StationaryReport(
        gamma=bath.gamma, Gamma=bath.Gamma, T=bath.T,
        r2=r2, p2_R=p2, px2_eq=px2,
        e_rx=e_rx,
        e_n_inf=_log_neg_from_nu(spec.nu_tilde_minus),
        integral_lhs=lhs,
        entangled=e_rx > 0,
        simon_s_inf=simon_criterion(cov),
        mutual_info=mutual_information(cov),
        nu_tilde_minus=spec.nu_tilde_minus,
        corr_qq=2.0 * float(cov.v[0, 2]),
        corr_pp=2.0 * float(cov.v[1, 3]),
        cov=cov,
    )


def com_bath(gamma: float, Gamma: float, T: float, mass: float = 1.0) -> BathSpec:
    """Bath seen by the center of mass of two modes of mass ``mass``."""
    return BathSpec(gamma, Gamma, T, mass=2.0 * mass)


# ---------------------------------------------------------------------------
# critical temperature

def _criterion_gap(gamma: float, Gamma: float, T: float, qc, mass: float) -> float:
    """``4 <R^2><p_x^2>_eq - 1/4``; negative below the critical temperature."""
    b = com_bath(gamma, Gamma, T, mass)
    r2, _ = bk.stationary_R_moments(b, qc)
    return 4.0 * r2 * relative_momentum_eq(b) - 0.25


def critical_temperature(gamma: float, Gamma: float, qc: QuadratureConfig = DEFAULT_QUAD,
                         mass: float = 1.0, t_range: tuple[float, float] = T_SEARCH,
                         n_probes: int = T_PROBES, rel_tol: float = T_REL_TOL) -> float | None:
    """Temperature above which the stationary state is separable.

    ``None`` when the state is separable already at the lowest probe.

    Raises:
        NoBracketError: the state stays entangled over the whole search range.
    """
    if not (gamma > 0 and Gamma > 0):
        raise ValueError("gamma and Gamma must be > 0")
    temps = np.geomspace(t_range[0], t_range[1], n_probes)
    g = lambda T: _criterion_gap(gamma, Gamma, float(T), qc, mass)  # noqa: E731
    prev_T, prev_g = temps[0], g(temps[0])
    if prev_g > 0:
        return None
    for T in temps[1:]:
        gT = g(T)
        if gT > 0:
            lo, hi = math.log(prev_T), math.log(T)
            while hi - lo > rel_tol:
                mid = 0.5 * (lo + hi)
                if g(math.exp(mid)) > 0:
                    hi = mid
                else:
                    lo = mid
            return math.exp(0.5 * (lo + hi))
        prev_T, prev_g = T, gT
    raise NoBracketError(
        f"stationary state entangled on the whole range T in [{t_range[0]:g}, {t_range[1]:g}]"
    )


# ---------------------------------------------------------------------------
# scans

@dataclass(frozen=True)
class CellResult:
    i: int
    j: int
    gamma: float
    Gamma: float
    T: float
    report: StationaryReport | None
    error: str | None = None


def _scan_cell(i, j, gamma, Gamma, T, qc, mass) -> CellResult:
    try:
        rep = stationary_report(com_bath(gamma, Gamma, T, mass), qc)
        return CellResult(i, j, gamma, Gamma, T, rep)
    except (QBMError, ValueError, ArithmeticError) as exc:
        return CellResult(i, j, gamma, Gamma, T, None, f"{type(exc).__name__}: {exc}")


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def iter_phase_scan(gamma_grid, Gamma_grid, T: float, qc: QuadratureConfig = DEFAULT_QUAD,
                    n_jobs: int | None = None, skip=frozenset(), mass: float = 1.0) -> Iterator[CellResult]:
    """Yield scan cells in grid order (gamma outer, Gamma inner).

    Cells whose ``(i, j)`` is in ``skip`` are not evaluated. With more than
    one worker the cells run on a bounded joblib pool; results are still
    yielded in grid order.
    """
    gammas, Gammas = list(gamma_grid), list(Gamma_grid)
    if not gammas or not Gammas:
        raise ValueError("scan grids must be nonempty")
    for x in gammas + Gammas:
        if not (math.isfinite(x) and x > 0):
            raise ValueError(f"scan grid value {x!r} must be > 0")
    cells = [(i, j, g, G) for i, g in enumerate(gammas) for j, G in enumerate(Gammas)
             if (i, j) not in skip]
    n_jobs = default_workers() if n_jobs is None else n_jobs
    if n_jobs < 1:
        raise ValueError("n_jobs must be >= 1")
    if n_jobs == 1 or len(cells) <= 1:
        for i, j, g, G in cells:
            yield _scan_cell(i, j, g, G, T, qc, mass)
        return
    from joblib import Parallel, delayed

    pool = Parallel(n_jobs=min(n_jobs, len(cells)), return_as="generator")
    yield from pool(delayed(_scan_cell)(i, j, g, G, T, qc, mass) for i, j, g, G in cells)


def phase_scan(gamma_grid, Gamma_grid, T: float, qc: QuadratureConfig = DEFAULT_QUAD,
               n_jobs: int | None = 1, mass: float = 1.0) -> list[list]:
    """Grid of :class:`StationaryReport`; failed cells hold the error message string."""
    gammas, Gammas = list(gamma_grid), list(Gamma_grid)
    grid = [[None] * len(Gammas) for _ in gammas]
    for cell in iter_phase_scan(gammas, Gammas, T, qc, n_jobs=n_jobs, mass=mass):
        grid[cell.i][cell.j] = cell.report if cell.report is not None else cell.error
    return grid


# ---------------------------------------------------------------------------
# temperature profiles

def temperature_profile(bath_base: BathSpec, T_grid, qc: QuadratureConfig = DEFAULT_QUAD) -> list:
    """Stationary reports over ``T_grid`` for the center-of-mass bath ``bath_base``.

    Errors propagate per point: a failed temperature holds the exception.
    """
    temps = [float(T) for T in T_grid]
    if any(not (T > 0) for T in temps):
        raise ValueError("temperatures must be > 0")
    if any(b <= a for a, b in zip(temps[:-1], temps[1:])):
        raise ValueError("T_grid must be ascending")
    out = []
    for T in temps:
        b = BathSpec(bath_base.gamma, bath_base.Gamma, T, bath_base.mass, bath_base.omega0)
        try:
            out.append(stationary_report(b, qc))
        except (QBMError, ValueError, ArithmeticError) as exc:
            out.append(exc)
    return out


def last_positive(temps, values, threshold: float = 0.0) -> float | None:
    """Largest temperature at which ``value > threshold``."""
    best = None
    for T, v in zip(temps, values):
        if v > threshold:
            best = T
    return best
