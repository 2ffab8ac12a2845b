"""Time evolution of two-mode covariance matrices in the reservoir models.

Four channel models are supported:

* ``TWO_RESERVOIR``: each mode is damped by its own Drude bath; the 4x4
  covariance matrix obeys ``dV/dt = A V + V A^T + D`` with HPZ coefficients.
* ``COMMON_MODIFIED``: both modes couple to one bath through the center of
  mass ``R = (q1 + q2)/2`` (mass ``M = 2m``); the relative coordinate
  ``x = q1 - q2`` relaxes phenomenologically at the Markovian rate.
* ``COMMON_UNDAMPED_REL``: as above, but the relative pair evolves unitarily.
* ``MARKOVIAN_REFERENCE``: closed-form relaxation of the standard-form
  elements in the rotating frame.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_continuous_lyapunov

from . import bath_kernels as bk
from .bath_kernels import DEFAULT_QUAD, BathSpec, HpzCoefficients, QuadratureConfig
from .errors import IntegratorError, UnphysicalStateError
from .gaussian_states import (
    TOL_PHYS,
    TOL_TRANSIENT,
    CovarianceMatrix,
    as_covariance,
    check_physical,
    purities,
    simon_criterion,
    standard_form,
    symplectic_eigenvalues_sym,
    symplectic_spectrum,
    von_neumann_entropies,
    _log_neg_from_nu,
)

log = logging.getLogger(__name__)

RTOL = 1e-8
ATOL = 1e-10


class ChannelKind(enum.Enum):
    TWO_RESERVOIR = "two_reservoir"
    COMMON_MODIFIED = "common_modified"
    COMMON_UNDAMPED_REL = "common_undamped_rel"
    MARKOVIAN_REFERENCE = "markovian_reference"


class RelativeRateSource(enum.Enum):
    STATIONARY_GAMMA_P = "stationary_gamma_p"
    EXPLICIT = "explicit"


COM_SOLVERS = ("langevin", "hpz")


@dataclass(frozen=True)
class DynamicsOptions:
    """Model switches.

    Attributes:
        compensate_shift: subtract the stationary frequency shift from
            ``Omega^2(t)`` in the HPZ equations.
        rel_eq_factor: multiplier on the relative-coordinate equilibrium
            ``<x^2>_eq = rel_eq_factor * (2 nbar + 1)``.
        exact_coefficients: evaluate D_p, D_qp by quadrature at every
            integrator step instead of interpolating a node table.
        com_solver: ``"langevin"`` (exact Gaussian solution of the
            generalized Langevin equation) or ``"hpz"`` (second-order
            moment equations with mass M) for the center of mass.
        rel_rotation: let the relaxing relative pair also rotate freely
            (secular weak-damping solution). Off by default: the relative
            variances then relax monotonically and ``<{x, p_x}>`` stays 0.
    """

    compensate_shift: bool = False
    rel_eq_factor: float = 1.0
    exact_coefficients: bool = False
    com_solver: str = "langevin"
    rel_rotation: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.rel_eq_factor) and self.rel_eq_factor > 0):
            raise ValueError(f"rel_eq_factor={self.rel_eq_factor!r} must be > 0")
        if self.com_solver not in COM_SOLVERS:
            raise ValueError(f"com_solver must be one of {COM_SOLVERS}, got {self.com_solver!r}")


@dataclass(frozen=True)
class ChannelModel:
    """A reservoir model; ``bath.mass`` is the single-mode mass m."""

    kind: ChannelKind
    bath: BathSpec
    relative_rate_source: RelativeRateSource = RelativeRateSource.STATIONARY_GAMMA_P
    relative_rate: float | None = None
    options: DynamicsOptions = field(default_factory=DynamicsOptions)

    def __post_init__(self):
        if not isinstance(self.kind, ChannelKind):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.relative_rate_source is RelativeRateSource.EXPLICIT:
            r = self.relative_rate
            if r is None or not (math.isfinite(r) and r >= 0):
                raise ValueError("EXPLICIT relative rate needs relative_rate >= 0")
        elif self.relative_rate is not None:
            raise ValueError("relative_rate is only used with RelativeRateSource.EXPLICIT")

    @property
    def com_bath(self) -> BathSpec:
        return self.bath.with_mass(2.0 * self.bath.mass)

    @property
    def strong_coupling(self) -> bool:
        return self.bath.gamma >= self.bath.omega0

    def relative_rate_value(self) -> float:
        """Relaxation rate of the relative pair: stationary gamma_p of a single mode."""
        if self.relative_rate_source is RelativeRateSource.EXPLICIT:
            return float(self.relative_rate)
        return bk.gamma_p_stationary(self.bath)


# ---------------------------------------------------------------------------
# moment containers

@dataclass(frozen=True)
class SingleModeMoments:
    """``<q^2>``, ``<{q,p}>/2``, ``<p^2>`` of one canonical pair."""

    s_qq: float
    s_qp: float
    s_pp: float

    @classmethod
    def from_matrix(cls, m) -> "SingleModeMoments":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(0.5 * (m[0, 1] + m[1, 0])), float(m[1, 1]))

    def matrix(self) -> np.ndarray:
        return np.array([[self.s_qq, self.s_qp], [self.s_qp, self.s_pp]])

    @property
    def det(self) -> float:
        return self.s_qq * self.s_pp - self.s_qp ** 2

    def is_physical(self, tol: float = TOL_PHYS) -> bool:
        return self.s_qq > 0 and self.s_pp > 0 and self.det >= 0.25 - tol


@dataclass(frozen=True)
class NormalModeState:
    """Center-of-mass pair ``(R, P_R)`` and relative pair ``(x, p_x)``.

    ``R = (q1 + q2)/2``, ``P_R = p1 + p2``, ``x = q1 - q2``, ``p_x = (p1 - p2)/2``.
    The two pairs are uncorrelated.
    """

    com: SingleModeMoments
    rel_xx: float
    rel_pp: float
    rel_xp: float = 0.0

    def __post_init__(self):
        if not (self.rel_xx > 0 and self.rel_pp > 0):
            raise ValueError("relative-pair variances must be > 0")
        if not (self.com.s_qq > 0 and self.com.s_pp > 0):
            raise ValueError("center-of-mass variances must be > 0")

    @property
    def rel(self) -> SingleModeMoments:
        return SingleModeMoments(self.rel_xx, self.rel_xp, self.rel_pp)

    @classmethod
    def from_covariance(cls, V, tol: float = 1e-9) -> "NormalModeState":
        """Inverse of :meth:`reconstruct_covariance`.

        Raises ``ValueError`` if center-of-mass and relative coordinates are
        correlated, which the normal-mode models cannot represent.
        """
        v = as_covariance(V).v
        T = _NORMAL_MAP
        w = T @ v @ T.T
        cross = w[:2, 2:]
        if np.max(np.abs(cross)) > tol * max(1.0, float(np.max(np.abs(v)))):
            raise ValueError("state has correlations between center-of-mass and relative coordinates")
        return cls(
            SingleModeMoments.from_matrix(w[:2, :2]),
            float(w[2, 2]), float(w[3, 3]), float(0.5 * (w[2, 3] + w[3, 2])),
        )

    def reconstruct_covariance(self) -> CovarianceMatrix:
        """Covariance matrix of ``q_j = R +/- x/2``, ``p_j = P_R/2 +/- p_x``."""
        return reconstruct_covariance(self)


# rows map (q1, p1, q2, p2) to (R, P_R, x, p_x)
_NORMAL_MAP = np.array([
    [0.5, 0.0, 0.5, 0.0],
    [0.0, 1.0, 0.0, 1.0],
    [1.0, 0.0, -1.0, 0.0],
    [0.0, 0.5, 0.0, -0.5],
])


def reconstruct_covariance(nm: NormalModeState) -> CovarianceMatrix:
    R2, RP, P2 = nm.com.s_qq, nm.com.s_qp, nm.com.s_pp
    X2, XP, K2 = nm.rel_xx, nm.rel_xp, nm.rel_pp
    qq_d, qq_o = R2 + X2 / 4, R2 - X2 / 4
    pp_d, pp_o = P2 / 4 + K2, P2 / 4 - K2
    qp_d, qp_o = RP / 2 + XP / 2, RP / 2 - XP / 2
    v = np.array([
        [qq_d, qp_d, qq_o, qp_o],
        [qp_d, pp_d, qp_o, pp_o],
        [qq_o, qp_o, qq_d, qp_d],
        [qp_o, pp_o, qp_d, pp_d],
    ])
    return CovarianceMatrix(v)


def squeezed_initial_state(xi: float) -> CovarianceMatrix:
    """Two-mode squeezed vacuum with ``<{q1,q2}> = -<{p1,p2}> = sinh(2 xi)``."""
    a, c = 0.5 * math.cosh(2 * xi), 0.5 * math.sinh(2 * xi)
    return CovarianceMatrix(np.array([
        [a, 0.0, c, 0.0],
        [0.0, a, 0.0, -c],
        [c, 0.0, a, 0.0],
        [0.0, -c, 0.0, a],
    ]))


# ---------------------------------------------------------------------------
# HPZ moment equations

def _omega_sq(coeff: HpzCoefficients, omega0: float, shift_ref: float) -> float:
    return omega0 ** 2 + coeff.delta_omega_sq - shift_ref


def hpz_moment_rhs(mom: SingleModeMoments, coeff: HpzCoefficients, mass: float,
                   omega0: float, shift_ref: float = 0.0) -> SingleModeMoments:
    """Time derivative of the single-mode moments under the HPZ equation.

    ``shift_ref`` is subtracted from ``Omega^2(t) = omega0^2 + delta_Omega^2(t)``
    (the stationary shift when it is compensated, zero otherwise).
    """
    w2 = _omega_sq(coeff, omega0, shift_ref)
    return SingleModeMoments(
        2.0 * mom.s_qp / mass,
        mom.s_pp / mass - mass * w2 * mom.s_qq - coeff.gamma_p * mom.s_qp + coeff.d_qp,
        -2.0 * mass * w2 * mom.s_qp - 2.0 * coeff.gamma_p * mom.s_pp + 2.0 * coeff.d_p,
    )


def drift_diffusion(coeff: HpzCoefficients, mass: float, omega0: float,
                    shift_ref: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Single-mode ``A`` and ``D`` of ``dV/dt = A V + V A^T + D``."""
    w2 = _omega_sq(coeff, omega0, shift_ref)
    A = np.array([[0.0, 1.0 / mass], [-mass * w2, -coeff.gamma_p]])
    D = np.array([[0.0, coeff.d_qp], [coeff.d_qp, 2.0 * coeff.d_p]])
    return A, D


def lyapunov_residual(V, coeff: HpzCoefficients, mass: float, omega0: float,
                      shift_ref: float = 0.0) -> float:
    """``max |A V + V A^T + D|`` for a single-mode 2x2 block or a 4x4 product."""
    v = np.asarray(V, dtype=float)
    A, D = drift_diffusion(coeff, mass, omega0, shift_ref)
    n = v.shape[0] // 2
    A, D = np.kron(np.eye(n), A), np.kron(np.eye(n), D)
    return float(np.max(np.abs(A @ v + v @ A.T + D)))


def hpz_fixed_point(coeff: HpzCoefficients, mass: float, omega0: float,
                    shift_ref: float = 0.0) -> np.ndarray:
    """Stationary single-mode covariance for constant coefficients."""
    A, D = drift_diffusion(coeff, mass, omega0, shift_ref)
    out = solve_continuous_lyapunov(A, -D)
    return 0.5 * (out + out.T)


class CoefficientCache:
    """HPZ coefficients on a node table with cubic interpolation.

    gamma_p and delta_Omega^2 are closed forms and evaluated directly. D_p and
    D_qp are tabulated with spacing ``0.02 min(1/Gamma, 1/omega0)`` during the
    transient ``t < 10/Gamma`` and ``0.02/omega0`` afterwards. Tabulation
    stops early once both have settled to their stationary values for a full
    oscillator period; beyond the last node the stationary values are used.
    Immutable after construction.
    """

    def __init__(self, bath: BathSpec, t_end: float, qc: QuadratureConfig = DEFAULT_QUAD,
                 exact: bool = False, settle_tol: float = 1e-11):
        self.bath = bath
        self.qc = qc
        self.exact = exact
        self.stationary = bk.hpz_stationary(bath, qc)
        self._dqp_inf = self.stationary.d_qp
        self.t_settled = math.inf
        if exact or bath.gamma == 0:
            self._spline = None
            return
        nodes, dp, dqp = self._tabulate(t_end, settle_tol)
        self.nodes = nodes
        self._spline = CubicSpline(nodes, np.column_stack([dqp, dp]), axis=0)

    def _node_times(self, t_end: float):
        G, w0 = self.bath.Gamma, self.bath.omega0
        t_tr = min(10.0 / G, t_end)
        h1 = 0.02 * min(1.0 / G, 1.0 / w0)
        n1 = max(2, int(math.ceil(t_tr / h1)) + 1)
        yield from np.linspace(0.0, t_tr, n1)
        h2 = 0.02 / w0
        n2 = int(math.ceil((t_end - t_tr) / h2))
        for k in range(1, n2 + 1):
            yield min(t_tr + k * h2, t_end)

    def _tabulate(self, t_end, settle_tol):
        st = self.stationary
        period = 2 * math.pi / self.bath.omega0
        scale_p = max(abs(st.d_p), 1e-300)
        scale_qp = max(abs(st.d_qp), abs(st.d_p), 1e-300)
        nodes, dp, dqp = [], [], []
        settled_since = None
        for t in self._node_times(t_end):
            a = bk.d_p(t, self.bath, self.qc)
            b = bk.d_qp(t, self.bath, self.qc, stationary=self._dqp_inf)
            nodes.append(t)
            dp.append(a)
            dqp.append(b)
            close = (abs(a - st.d_p) <= settle_tol * scale_p
                     and abs(b - st.d_qp) <= settle_tol * scale_qp
                     and t >= 10.0 / self.bath.Gamma)
            if close:
                settled_since = t if settled_since is None else settled_since
                if t - settled_since >= period:
                    self.t_settled = t
                    break
            else:
                settled_since = None
        if len(nodes) < 2:
            nodes.append(nodes[0] + 1e-12)
            dp.append(dp[0])
            dqp.append(dqp[0])
        return np.array(nodes), np.array(dp), np.array(dqp)

    def __call__(self, t: float) -> HpzCoefficients:
        gp = bk.gamma_p(t, self.bath)
        dw = bk.delta_omega_sq(t, self.bath)
        if self.bath.gamma == 0:
            return HpzCoefficients(gp, dw, 0.0, 0.0)
        if self._spline is None:
            return HpzCoefficients(gp, dw, bk.d_qp(t, self.bath, self.qc, self._dqp_inf),
                                   bk.d_p(t, self.bath, self.qc))
        if t >= self.nodes[-1] and self.t_settled <= self.nodes[-1]:
            return HpzCoefficients(gp, dw, self.stationary.d_qp, self.stationary.d_p)
        qp, p = self._spline(min(t, self.nodes[-1]))
        return HpzCoefficients(gp, dw, float(qp), float(p))


def _lyapunov_solution(V0: np.ndarray, coeffs: CoefficientCache, mass: float, omega0: float,
                       shift_ref: float, t_end: float, Gamma: float,
                       rtol: float = RTOL, atol: float = ATOL):
    """Integrate ``dV/dt = A V + V A^T + D`` for block-diagonal single-mode copies.

    Returns a callable ``t -> V(t)`` built from the integrator's dense output.
    """
    n = V0.shape[0] // 2
    eye = np.eye(n)

    def rhs(t, y):
        A1, D1 = drift_diffusion(coeffs(t), mass, omega0, shift_ref)
        A, D = np.kron(eye, A1), np.kron(eye, D1)
        v = y.reshape(V0.shape)
        return (A @ v + v @ A.T + D).ravel()

    t_tr = min(10.0 / Gamma, t_end)
    segments = []
    y = V0.ravel().astype(float)
    bounds = [(0.0, t_tr, 0.01 * min(1.0 / Gamma, 1.0 / omega0))]
    if t_end > t_tr:
        bounds.append((t_tr, t_end, np.inf))
    for a, b, max_step in bounds:
        if b <= a:
            continue
        sol = solve_ivp(rhs, (a, b), y, method="RK45", rtol=rtol, atol=atol,
                        max_step=max_step, dense_output=True)
        if not sol.success:
            raise IntegratorError(f"integration failed on [{a}, {b}]: {sol.message}")
        y = sol.y[:, -1]
        if not np.all(np.isfinite(y)):
            raise IntegratorError("non-finite covariance during integration")
        segments.append((a, b, sol.sol))

    def at(t: float) -> np.ndarray:
        if t == 0:
            return V0.copy()
        for a, b, s in segments:
            if t <= b:
                m = s(t).reshape(V0.shape)
                return 0.5 * (m + m.T)
        raise ValueError(f"t={t} beyond the integrated range {t_end}")

    return at


# ---------------------------------------------------------------------------
# channel propagators: objects that map t -> V(t)

def _free_rotation(t: float, mass: float, omega0: float) -> np.ndarray:
    c, s = math.cos(omega0 * t), math.sin(omega0 * t)
    return np.array([[c, s / (mass * omega0)], [-mass * omega0 * s, c]])


class _Propagator:
    def __call__(self, t: float) -> np.ndarray:
        raise NotImplementedError


class _Free(_Propagator):
    """Uncoupled modes: exact symplectic rotation of V0."""

    def __init__(self, model: ChannelModel, V0: np.ndarray):
        self.v0, self.bath = V0, model.bath

    def __call__(self, t):
        r = _free_rotation(t, self.bath.mass, self.bath.omega0)
        S = np.kron(np.eye(2), r)
        return S @ self.v0 @ S.T


class _TwoReservoir(_Propagator):
    def __init__(self, model: ChannelModel, V0: np.ndarray, t_end: float, qc, rtol, atol):
        bath, opt = model.bath, model.options
        cache = CoefficientCache(bath, t_end, qc, exact=opt.exact_coefficients)
        shift = bk.delta_omega_sq_stationary(bath) if opt.compensate_shift else 0.0
        self._at = _lyapunov_solution(V0, cache, bath.mass, bath.omega0, shift, t_end,
                                      bath.Gamma, rtol, atol)

    def __call__(self, t):
        return self._at(t)


class _CommonReservoir(_Propagator):
    def __init__(self, model: ChannelModel, V0: np.ndarray, t_end: float, qc, rtol, atol):
        self.model = model
        nm = NormalModeState.from_covariance(V0)
        self.nm0 = nm
        bath, opt = model.com_bath, model.options
        self.M = bath.mass
        self.mu = 0.5 * model.bath.mass  # reduced mass of the relative pair
        self.w0 = bath.omega0
        self._com0 = nm.com.matrix()
        if opt.com_solver == "langevin":
            self._resp = bk.DampedOscillatorResponse(bath, qc)
            self._com_at = lambda t: self._resp.covariance(t, self._com0)
        else:
            cache = CoefficientCache(bath, t_end, qc, exact=opt.exact_coefficients)
            shift = bk.delta_omega_sq_stationary(bath) if opt.compensate_shift else 0.0
            self._com_at = _lyapunov_solution(self._com0, cache, bath.mass, bath.omega0,
                                              shift, t_end, bath.Gamma, rtol, atol)
        self._rel0 = nm.rel.matrix()
        if model.kind is ChannelKind.COMMON_MODIFIED:
            self.rate = model.relative_rate_value()
            self._rel_eq = relative_equilibrium(model)
            # an uncoupled pair (rate 0) evolves unitarily
            self.rotate = opt.rel_rotation or self.rate == 0.0
        else:
            self.rate = 0.0
            self._rel_eq = np.zeros((2, 2))
            self.rotate = True

    def rel_at(self, t: float) -> np.ndarray:
        """Relative-pair covariance at time t.

        COMMON_MODIFIED: ``<x^2>`` and ``<p_x^2>`` relax exponentially toward
        equilibrium, ``<{x, p_x}>`` decays with them. With ``rel_rotation``
        the initial moments are first rotated freely; the equilibrium is
        invariant under that rotation. A zero rate and COMMON_UNDAMPED_REL
        give free rotation.
        """
        decay = math.exp(-self.rate * t)
        if self.rotate:
            S = _free_rotation(t, self.mu, self.w0)
            start = S @ self._rel0 @ S.T
        else:
            start = self._rel0
        out = decay * start + (1.0 - decay) * self._rel_eq
        return 0.5 * (out + out.T)

    def normal_modes(self, t: float) -> NormalModeState:
        com = self._com_at(t)
        rel = self.rel_at(t)
        return NormalModeState(SingleModeMoments.from_matrix(com), float(rel[0, 0]),
                               float(rel[1, 1]), float(rel[0, 1]))

    def __call__(self, t):
        return self.normal_modes(t).reconstruct_covariance().v


def relative_equilibrium(model: ChannelModel) -> np.ndarray:
    """Thermal ``(x, p_x)`` moments for the reduced mass ``m/2``.

    ``<x^2>_eq = rel_eq_factor (2 nbar + 1)``, ``<p_x^2>_eq = (2 nbar + 1)/4``
    for ``m = omega0 = 1``.
    """
    bath = model.bath
    mu = 0.5 * bath.mass
    coth = 2.0 * bath.nbar + 1.0
    return np.diag([
        model.options.rel_eq_factor * coth / (2.0 * mu * bath.omega0),
        mu * bath.omega0 * coth / 2.0,
    ])


class _MarkovianReference(_Propagator):
    """Standard-form elements relaxing at rate gamma toward ``(2 nbar + 1)/2``."""

    def __init__(self, model: ChannelModel, V0: np.ndarray):
        sf = standard_form(CovarianceMatrix(V0))
        self.sf = sf
        self.gamma = model.bath.gamma
        self.a_eq = 0.5 * (2.0 * model.bath.nbar + 1.0)

    def __call__(self, t):
        e = math.exp(-self.gamma * t)
        sf = self.sf
        a = (sf.a - self.a_eq) * e + self.a_eq
        b = (sf.b - self.a_eq) * e + self.a_eq
        cp, cm = sf.c_plus * e, sf.c_minus * e
        return np.array([[a, 0, cp, 0], [0, a, 0, cm], [cp, 0, b, 0], [0, cm, 0, b]], dtype=float)


# ---------------------------------------------------------------------------
# trajectories

DIAGNOSTIC_NAMES = ("EN", "S", "mu", "mu1", "mu2", "I", "nu_tilde_minus")


def diagnostics_of(V, tol: float = TOL_PHYS) -> dict[str, float]:
    """Entanglement and purity diagnostics of one state."""
    cov = as_covariance(V)
    spec = symplectic_spectrum(cov, tol=max(tol, TOL_PHYS))
    p = purities(cov, tol)
    s_tot, s1, s2 = von_neumann_entropies(cov, tol)
    return {
        "EN": _log_neg_from_nu(spec.nu_tilde_minus),
        "S": simon_criterion(cov, tol),
        "mu": p.mu,
        "mu1": p.mu1,
        "mu2": p.mu2,
        "I": max(0.0, s1 + s2 - s_tot),
        "nu_tilde_minus": spec.nu_tilde_minus,
    }


def physicality_deficit(V) -> float:
    """``max(0, 1/2 - nu_minus)`` from the well-conditioned symmetric route."""
    nu_minus, _ = symplectic_eigenvalues_sym(V)
    return max(0.0, 0.5 - nu_minus)


@dataclass
class Trajectory:
    """Time-indexed covariance matrices with per-step diagnostics.

    Attributes:
        times: strictly increasing times starting at 0.
        states: covariance matrix at each time.
        diagnostics: arrays keyed by :data:`DIAGNOSTIC_NAMES`.
        warnings: physicality warnings recorded during the evolution.
        sampler: optional ``t -> CovarianceMatrix`` for evaluating the same
            evolution between grid points (used for crossing refinement).
    """

    times: np.ndarray
    states: list
    diagnostics: dict
    warnings: list = field(default_factory=list)
    sampler: Callable[[float], CovarianceMatrix] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.diagnostics[name]

    def state_at(self, t: float) -> CovarianceMatrix:
        if self.sampler is None:
            raise ValueError("trajectory has no sampler; only grid states are available")
        return self.sampler(t)

    @classmethod
    def from_states(cls, times, states, warnings=None, sampler=None,
                    tol: float = TOL_PHYS) -> "Trajectory":
        rows = [diagnostics_of(V, tol) for V in states]
        diag = {k: np.array([r[k] for r in rows]) for k in DIAGNOSTIC_NAMES}
        return cls(np.asarray(times, dtype=float), list(states), diag, list(warnings or []), sampler)

    def to_csv(self, path) -> None:
        from .io import write_trajectory_csv
        write_trajectory_csv(self, path)

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        from .io import read_trajectory_csv
        return read_trajectory_csv(path)


def _validate_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) < 1:
        raise ValueError("t_grid must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(t)):
        raise ValueError("t_grid has non-finite entries")
    if t[0] != 0.0:
        raise ValueError("t_grid must start at 0")
    if len(t) > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    return t


def make_propagator(model: ChannelModel, V0, t_end: float, qc: QuadratureConfig = DEFAULT_QUAD,
                    rtol: float = RTOL, atol: float = ATOL) -> _Propagator:
    v0 = as_covariance(V0).v
    kind = model.kind
    if model.bath.gamma == 0 and kind is not ChannelKind.MARKOVIAN_REFERENCE:
        return _Free(model, v0)
    if kind is ChannelKind.TWO_RESERVOIR:
        return _TwoReservoir(model, v0, t_end, qc, rtol, atol)
    if kind in (ChannelKind.COMMON_MODIFIED, ChannelKind.COMMON_UNDAMPED_REL):
        return _CommonReservoir(model, v0, t_end, qc, rtol, atol)
    return _MarkovianReference(model, v0)


class _PhysicalityGuard:
    """Applies the physicality policy to evolved states."""

    def __init__(self, model: ChannelModel):
        self.model = model
        self.warnings: list[str] = []

    def check(self, t: float, v: np.ndarray) -> tuple[CovarianceMatrix, float]:
        cov = CovarianceMatrix.from_array(v, tol=1e-7)
        if np.min(np.linalg.eigvalsh(cov.v)) <= 0:
            raise UnphysicalStateError(f"covariance lost positive definiteness at t={t:.6g}")
        deficit = physicality_deficit(cov)
        if deficit > TOL_PHYS:
            msg = f"t={t:.6g}: nu_minus below 1/2 by {deficit:.3g}"
            if deficit > TOL_TRANSIENT and not self.model.strong_coupling:
                raise UnphysicalStateError(msg)
            self.warnings.append(msg)
            log.warning(msg)
        return cov, deficit


def evolve(model: ChannelModel, V0, t_grid, qc: QuadratureConfig = DEFAULT_QUAD,
           rtol: float = RTOL, atol: float = ATOL) -> Trajectory:
    """Evolve ``V0`` under ``model`` and sample it on ``t_grid``.

    Raises:
        UnphysicalStateError: V0 is unphysical, or an evolved state violates
            the uncertainty relation beyond the transient tolerance in a
            weak-coupling run.
        IntegratorError: time integration failed.
    """
    cov0 = as_covariance(V0)
    try:
        check_physical(cov0)
    except UnphysicalStateError as exc:
        raise UnphysicalStateError(f"initial state: {exc}") from exc
    t = _validate_grid(t_grid)
    prop = make_propagator(model, cov0, float(t[-1]), qc, rtol, atol)
    guard = _PhysicalityGuard(model)
    states, worst = [cov0], 0.0
    for ti in t[1:]:
        cov, deficit = guard.check(ti, prop(float(ti)))
        states.append(cov)
        worst = max(worst, deficit)

    def sampler(ts: float) -> CovarianceMatrix:
        return cov0 if ts == 0 else CovarianceMatrix.from_array(prop(float(ts)), tol=1e-7)

    tol = max(TOL_PHYS, worst * (1 + 1e-6) + 1e-12)
    return Trajectory.from_states(t, states, guard.warnings, sampler, tol=tol)


def stationary_state(model: ChannelModel, qc: QuadratureConfig = DEFAULT_QUAD) -> CovarianceMatrix:
    """Long-time limit of :func:`evolve` for ``model``.

    TWO_RESERVOIR uses the Lyapunov fixed point of the stationary HPZ
    coefficients; the common-reservoir models take the center of mass from
    the chosen ``com_solver`` and the relative pair at equilibrium.
    """
    bath, opt = model.bath, model.options
    if bath.gamma == 0:
        raise ValueError("an undamped model has no stationary state")
    if model.kind is ChannelKind.TWO_RESERVOIR:
        shift = bk.delta_omega_sq_stationary(bath) if opt.compensate_shift else 0.0
        s = hpz_fixed_point(bk.hpz_stationary(bath, qc), bath.mass, bath.omega0, shift)
        return CovarianceMatrix.from_array(np.kron(np.eye(2), s))
    if model.kind is ChannelKind.MARKOVIAN_REFERENCE:
        return CovarianceMatrix(np.eye(4) * 0.5 * (2.0 * bath.nbar + 1.0))
    if model.kind is ChannelKind.COMMON_UNDAMPED_REL:
        raise ValueError("the relative pair of COMMON_UNDAMPED_REL never becomes stationary")
    com = stationary_com(model, qc)
    rel = relative_equilibrium(model)
    nm = NormalModeState(SingleModeMoments.from_matrix(com), float(rel[0, 0]), float(rel[1, 1]), 0.0)
    return nm.reconstruct_covariance()


def stationary_com(model: ChannelModel, qc: QuadratureConfig = DEFAULT_QUAD) -> np.ndarray:
    """Stationary ``(R, P_R)`` covariance for the model's center-of-mass solver."""
    cb, opt = model.com_bath, model.options
    if opt.com_solver == "langevin":
        return bk.DampedOscillatorResponse(cb, qc).stationary_covariance()
    shift = bk.delta_omega_sq_stationary(cb) if opt.compensate_shift else 0.0
    return hpz_fixed_point(bk.hpz_stationary(cb, qc), cb.mass, cb.omega0, shift)


# ---------------------------------------------------------------------------
# Markovian closed forms

@dataclass(frozen=True)
class MarkovianTimes:
    """Separability times of the Markovian reference.

    ``tau2`` is ``None`` when undefined (squeezing at or above ``xi_c``).
    """

    tau1: float
    tau2: float | None
    xi_c: float
    nbar: float


def markovian_times(xi: float, gamma: float, T: float) -> MarkovianTimes:
    if not (math.isfinite(gamma) and gamma > 0):
        raise ValueError(f"gamma={gamma!r} must be > 0")
    if not (math.isfinite(T) and T >= 0):
        raise ValueError(f"T={T!r} must be >= 0")
    if not (math.isfinite(xi) and xi >= 0):
        raise ValueError(f"xi={xi!r} must be >= 0")
    nbar = bk.bose_occupation(1.0, T)
    growth = -math.expm1(-2 * xi) + 0.0  # 1 - e^{-2 xi}, never -0.0
    if nbar == 0:
        tau1 = 0.0 if xi == 0 else math.inf
    else:
        tau1 = math.log1p(growth / (2 * nbar)) / gamma
    thermal = 2 * nbar + 1
    xi_c = 0.5 * math.log(thermal)
    den = thermal - math.exp(2 * xi)
    tau2 = None if den <= 0 else math.log((thermal - math.exp(-2 * xi)) / den) / (2 * gamma)
    return MarkovianTimes(tau1, tau2, xi_c, nbar)


__all__ = [
    "ChannelKind",
    "ChannelModel",
    "CoefficientCache",
    "DynamicsOptions",
    "MarkovianTimes",
    "NormalModeState",
    "RelativeRateSource",
    "SingleModeMoments",
    "Trajectory",
    "diagnostics_of",
    "evolve",
    "hpz_fixed_point",
    "hpz_moment_rhs",
    "lyapunov_residual",
    "make_propagator",
    "markovian_times",
    "reconstruct_covariance",
    "relative_equilibrium",
    "squeezed_initial_state",
    "stationary_com",
    "stationary_state",
]
