"""Drude-bath kernels, second-order HPZ coefficients and stationary
fluctuation integrals of the damped center-of-mass oscillator.

Units: hbar = k_B = 1, frequencies in units of the bare oscillator
frequency. ``J(w) = gamma * w * Gamma^2 / (w^2 + Gamma^2)``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import DivergentKernelError, NumericDomainError, QuadratureError

log = logging.getLogger(__name__)

# below this value of beta*w the series of coth(beta*w/2) is used
COTH_SERIES_CUTOFF = 1e-4


@dataclass(frozen=True)
class BathSpec:
    """Reservoir parameters plus the mass and frequency of the coupled oscillator."""

    gamma: float
    Gamma: float
    T: float
    mass: float = 1.0
    omega0: float = 1.0

    def __post_init__(self):
        checks = [
            ("gamma", self.gamma >= 0, "must be >= 0"),
            ("Gamma", self.Gamma > 0, "must be > 0"),
            ("T", self.T >= 0, "must be >= 0"),
            ("mass", self.mass > 0, "must be > 0"),
            ("omega0", self.omega0 > 0, "must be > 0"),
        ]
        for name, ok, msg in checks:
            val = getattr(self, name)
            if not (math.isfinite(val) and ok):
                raise ValueError(f"{name}={val!r} {msg}")

    def with_mass(self, mass: float) -> "BathSpec":
        return replace(self, mass=mass)

    @property
    def nbar(self) -> float:
        """Bose occupation at the oscillator frequency."""
        return bose_occupation(self.omega0, self.T)


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 200
    omega_max_factor: float = 50.0

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be > 0")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if not self.omega_max_factor > 0:
            raise ValueError("omega_max_factor must be > 0")


DEFAULT_QUAD = QuadratureConfig()


@dataclass(frozen=True)
class HpzCoefficients:
    gamma_p: float
    delta_omega_sq: float
    d_qp: float
    d_p: float


def bose_occupation(omega: float, T: float) -> float:
    if T == 0:
        return 0.0
    x = omega / T
    # e^{-x} / (1 - e^{-x}) stays finite for large x
    return math.exp(-x) / -math.expm1(-x)


def thermal_factor(omega, T: float):
    """``coth(omega / 2T)``; exactly 1 at T = 0 and series-expanded near omega = 0.

    Returns ``inf`` at omega = 0 for T > 0; callers multiply by J(omega) and
    use :func:`noise_density` for the finite product.
    """
    w = np.asarray(omega, dtype=float)
    if T == 0:
        return np.ones_like(w) if w.ndim else 1.0
    x = w / T
    with np.errstate(divide="ignore", over="ignore"):
        out = np.where(
            x < COTH_SERIES_CUTOFF,
            2.0 / x + x / 6.0,
            1.0 / np.tanh(np.minimum(x, 80.0) / 2.0),
        )
    return out if w.ndim else float(out)


def spectral_density(omega, bath: BathSpec):
    w = np.asarray(omega, dtype=float)
    out = bath.gamma * w * bath.Gamma ** 2 / (w * w + bath.Gamma ** 2)
    return out if w.ndim else float(out)


def noise_density(omega: float, bath: BathSpec) -> float:
    """``J(|w|) coth(|w| / 2T)``, the even spectral weight of K(t); finite at w = 0."""
    w = abs(float(omega))
    lorentz = bath.gamma * bath.Gamma ** 2 / (w * w + bath.Gamma ** 2)
    if bath.T == 0:
        return lorentz * w
    x = w / bath.T
    if x < COTH_SERIES_CUTOFF:
        # w coth(w/2T) = 2T + w^2/(6T) + O(w^4)
        return lorentz * (2.0 * bath.T + w * w / (6.0 * bath.T))
    return lorentz * w / (math.tanh(0.5 * x) if x < 80.0 else 1.0)


# ---------------------------------------------------------------------------
# quadrature plumbing

def _quad(func, a, b, qc: QuadratureConfig, what: str, **kw) -> float:
    """scipy ``quad`` with tolerance enforcement.

    A QUADPACK warning is tolerated when the returned error estimate still
    meets the requested tolerance within a factor 1e3.
    """
    kw.setdefault("limit", qc.max_subdivisions)
    if kw.get("weight") is not None and b == np.inf:
        kw.pop("limit")
        kw.setdefault("limlst", max(50, qc.max_subdivisions))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        res = quad(func, a, b, epsabs=qc.abs_tol, epsrel=qc.rel_tol, full_output=1, **kw)
    val, err = float(res[0]), float(res[1])
    if not math.isfinite(val):
        raise QuadratureError(f"{what}: non-finite integral on [{a}, {b}]")
    ier = 1 if len(res) > 3 else 0  # a message is appended only on failure
    target = max(qc.abs_tol, qc.rel_tol * abs(val))
    if ier and err > 1e3 * target:
        raise QuadratureError(f"{what}: error estimate {err:.3g} exceeds tolerance {target:.3g}")
    if ier:
        log.debug("%s: QUADPACK warning accepted (err %.3g)", what, err)
    return val


def _split_points(center: float, half_width: float, lo: float = 0.0) -> list[float]:
    pts = [lo]
    for p in (center - half_width, center + half_width):
        if p > pts[-1]:
            pts.append(p)
    return pts


# ---------------------------------------------------------------------------
# kernels

def kernel_L(t, bath: BathSpec):
    """Dissipation kernel ``(1/pi) int J(w) sin(wt) dw = (gamma Gamma^2 / 2) e^{-Gamma t}``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    out = 0.5 * bath.gamma * bath.Gamma ** 2 * np.exp(-bath.Gamma * t)
    return out if t.ndim else float(out)


def kernel_L_quadrature(t: float, bath: BathSpec, qc: QuadratureConfig = DEFAULT_QUAD) -> float:
    """Direct Fourier-sine quadrature of L(t); reference for :func:`kernel_L`."""
    if t <= 0:
        raise ValueError("quadrature form of L needs t > 0")
    f = lambda w: spectral_density(w, bath)  # noqa: E731
    return _quad(f, 0.0, np.inf, qc, "L(t)", weight="sin", wvar=t) / math.pi


def kernel_K(t: float, bath: BathSpec, qc: QuadratureConfig = DEFAULT_QUAD) -> float:
    """Noise kernel ``(1/pi) int J(w) coth(w/2T) cos(wt) dw`` for t > 0."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        raise DivergentKernelError("K(t) diverges logarithmically at t = 0")
    f = lambda w: noise_density(w, bath)  # noqa: E731
    total = 0.0
    lo = 0.0
    # resolve the coth shoulder at w ~ T before the Fourier tail
    if 0 < bath.T:
        for edge in (20.0 * bath.T, max(bath.Gamma, bath.omega0)):
            if edge > lo:
                total += _quad(f, lo, edge, qc, "K(t)", weight="cos", wvar=t)
                lo = edge
    total += _quad(f, lo, np.inf, qc, "K(t)", weight="cos", wvar=t)
    return total / math.pi


def gamma_p(t, bath: BathSpec):
    """Dissipation coefficient, closed form for the exponential L(t)."""
    t = np.asarray(t, dtype=float)
    G, w0, m = bath.Gamma, bath.omega0, bath.mass
    pref = bath.gamma * G ** 2 / (m * (G ** 2 + w0 ** 2))
    out = pref * (1.0 - np.exp(-G * t) * (np.cos(w0 * t) + (G / w0) * np.sin(w0 * t)))
    return out if t.ndim else float(out)


def delta_omega_sq(t, bath: BathSpec):
    """Frequency-shift coefficient including the counter-term ``gamma Gamma / m``."""
    t = np.asarray(t, dtype=float)
    G, w0, m = bath.Gamma, bath.omega0, bath.mass
    pref = bath.gamma * G ** 2 / (m * (G ** 2 + w0 ** 2))
    out = bath.gamma * G / m - pref * (G - np.exp(-G * t) * (G * np.cos(w0 * t) - w0 * np.sin(w0 * t)))
    return out if t.ndim else float(out)


def gamma_p_stationary(bath: BathSpec) -> float:
    G, w0 = bath.Gamma, bath.omega0
    return bath.gamma * G ** 2 / (bath.mass * (G ** 2 + w0 ** 2))


def delta_omega_sq_stationary(bath: BathSpec) -> float:
    G, w0 = bath.Gamma, bath.omega0
    return bath.gamma * G * w0 ** 2 / (bath.mass * (G ** 2 + w0 ** 2))


def _resonance_halfwidth(bath: BathSpec) -> float:
    """Width of the thermal shoulder of J coth around w = 0, seen from w0."""
    return min(0.5 * bath.omega0, 20.0 * bath.T) if bath.T > 0 else 0.5 * bath.omega0


def d_p(t: float, bath: BathSpec, qc: QuadratureConfig = DEFAULT_QUAD) -> float:
    """Normal diffusion ``int_0^t K(s) cos(w0 s) ds`` by the order-swapped route.

    With the even weight ``g(w) = J coth / pi`` the time integral becomes
    ``(1/2) int_0^inf G(v) sin(vt)/v dv``, ``G(v) = g(w0+v) + g(w0-v)``.
    ``G(0) / (1 + v^2/w0^2)`` is subtracted and integrated analytically so the
    remaining Fourier integrand is regular at v = 0.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0 or bath.gamma == 0:
        return 0.0
    w0 = bath.omega0
    g = lambda w: noise_density(w, bath) / math.pi  # noqa: E731
    G0 = 2.0 * g(w0)

    def resid(v):
        if v == 0.0:
            return 0.0
        return (g(w0 + v) + g(w0 - v) - G0 / (1.0 + (v / w0) ** 2)) / v

    hw = _resonance_halfwidth(bath)
    pts = _split_points(w0, hw)
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        total += _quad(resid, a, b, qc, "D_p(t)", weight="sin", wvar=t)
    total += _quad(resid, pts[-1], np.inf, qc, "D_p(t)", weight="sin", wvar=t)
    analytic = G0 * 0.5 * math.pi * (1.0 - math.exp(-w0 * t))
    return 0.5 * (total + analytic)


def _dqp_weight(bath: BathSpec):
    w0 = bath.omega0
    g = lambda w: noise_density(w, bath) / math.pi  # noqa: E731

    def h(v):
        if v == 0.0:
            return 0.0
        return (g(w0 + v) - g(w0 - v)) / v

    return h


def d_qp_stationary(bath: BathSpec, qc: QuadratureConfig = DEFAULT_QUAD) -> float:
    """Principal-value limit ``(1/m w0) int_0^inf K(s) sin(w0 s) ds``."""
    if bath.gamma == 0:
        return 0.0
    h = _dqp_weight(bath)
    pts = _split_points(bath.omega0, _resonance_halfwidth(bath))
    pv = sum(_quad(h, a, b, qc, "D_qp(inf)") for a, b in zip(pts[:-1], pts[1:]))
    pv += _quad(h, pts[-1], np.inf, qc, "D_qp(inf)")
    return -pv / (2.0 * bath.mass * bath.omega0)


def d_qp(t: float, bath: BathSpec, qc: QuadratureConfig = DEFAULT_QUAD,
         stationary: float | None = None) -> float:
    """Anomalous diffusion ``(1/m w0) int_0^t K(s) sin(w0 s) ds``, order-swapped.

    Equals ``-(1/2 m w0) int_0^inf H(v)/v (1 - cos vt) dv`` with
    ``H(v) = g(w0+v) - g(w0-v)``; the constant part is the stationary value.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0 or bath.gamma == 0:
        return 0.0
    if stationary is None:
        stationary = d_qp_stationary(bath, qc)
    h = _dqp_weight(bath)
    pts = _split_points(bath.omega0, _resonance_halfwidth(bath))
    osc = sum(_quad(h, a, b, qc, "D_qp(t)", weight="cos", wvar=t) for a, b in zip(pts[:-1], pts[1:]))
    osc += _quad(h, pts[-1], np.inf, qc, "D_qp(t)", weight="cos", wvar=t)
    return stationary + osc / (2.0 * bath.mass * bath.omega0)


def d_p_stationary(bath: BathSpec) -> float:
    """``J(w0) coth(w0/2T) / 2``."""
    return 0.5 * noise_density(bath.omega0, bath)


def hpz_coefficients(t: float, bath: BathSpec, qc: QuadratureConfig = DEFAULT_QUAD,
                     d_qp_inf: float | None = None) -> HpzCoefficients:
    if t < 0:
        raise ValueError("t must be >= 0")
    return HpzCoefficients(
        gamma_p=gamma_p(t, bath),
        delta_omega_sq=delta_omega_sq(t, bath),
        d_qp=d_qp(t, bath, qc, stationary=d_qp_inf),
        d_p=d_p(t, bath, qc),
    )


def hpz_stationary(bath: BathSpec, qc: QuadratureConfig = DEFAULT_QUAD) -> HpzCoefficients:
    return HpzCoefficients(
        gamma_p=gamma_p_stationary(bath),
        delta_omega_sq=delta_omega_sq_stationary(bath),
        d_qp=d_qp_stationary(bath, qc),
        d_p=d_p_stationary(bath),
    )


# ---------------------------------------------------------------------------
# susceptibility and stationary fluctuations

def memory_friction_transform(omega, bath: BathSpec):
    """``int_0^inf gamma Gamma e^{-Gamma t} e^{i w t} dt``."""
    w = np.asarray(omega, dtype=float)
    return bath.gamma * bath.Gamma / (bath.Gamma - 1j * w)


def susceptibility(omega, bath: BathSpec):
    """``chi(w) = 1 / (M w0^2 - M w^2 - i w gamma~(w))`` (complex)."""
    w = np.asarray(omega, dtype=float)
    M, w0 = bath.mass, bath.omega0
    return 1.0 / (M * (w0 ** 2 - w * w) - 1j * w * memory_friction_transform(w, bath))


def susceptibility_im(omega, bath: BathSpec):
    w = np.asarray(omega, dtype=float)
    G2 = bath.Gamma ** 2
    M, w0 = bath.mass, bath.omega0
    im_part = bath.gamma * G2 * w / (G2 + w * w)
    re_part = M * (w0 ** 2 - w * w) + bath.gamma * bath.Gamma * w * w / (G2 + w * w)
    den = re_part * re_part + im_part * im_part
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(im_part == 0.0, 0.0, im_part / np.where(den == 0.0, 1.0, den))
    return out if w.ndim else float(out)


def _fluct_weight(omega: float, bath: BathSpec) -> float:
    """``coth(w/2T) Im chi(w)``, finite at w = 0."""
    M, w0, G2 = bath.mass, bath.omega0, bath.Gamma ** 2
    w = float(omega)
    lor = bath.gamma * G2 / (G2 + w * w)
    re_part = M * (w0 * w0 - w * w) + lor * w * w / bath.Gamma
    # coth Im chi = coth lor w / |1/chi|^2 = noise_density / |1/chi|^2
    return noise_density(w, bath) / (re_part * re_part + (lor * w) ** 2)


def resonance_frequency(bath: BathSpec) -> float:
    """Zero of ``Re(1/chi)``: ``M(w0^2 - w^2) + gamma Gamma w^2/(Gamma^2 + w^2)``."""
    M, w0, G = bath.mass, bath.omega0, bath.Gamma
    # quadratic in u = w^2: M(w0^2 - u)(G^2 + u) + gamma G u = 0
    a = -M
    b = M * w0 ** 2 - M * G ** 2 + bath.gamma * G
    c = M * w0 ** 2 * G ** 2
    u = (-b - math.sqrt(b * b - 4 * a * c)) / (2 * a)
    return math.sqrt(u)


def _fluct_integral(f, bath: BathSpec, qc: QuadratureConfig, what: str) -> float:
    w0 = bath.omega0
    wr = resonance_frequency(bath)
    width = max(bath.gamma / bath.mass, 1e-4 * w0)
    w_max = qc.omega_max_factor * max(bath.Gamma, w0, bath.T)
    pts = sorted({p for p in (wr - 5 * width, wr, wr + 5 * width, 2 * w0) if 0 < p < w_max})
    if bath.T > 0 and 20 * bath.T < w_max:
        pts = sorted(set(pts) | {20 * bath.T})
    body = _quad(f, 0.0, w_max, qc, what, points=pts)
    tail = _quad(f, w_max, np.inf, qc, what + " tail")
    return (body + tail) / math.pi


def stationary_R_moments(bath: BathSpec, qc: QuadratureConfig = DEFAULT_QUAD) -> tuple[float, float]:
    """Stationary ``<R^2>`` and ``<P_R^2>`` of the damped oscillator.

    ``(1/pi) int coth(w/2T) Im chi(w) dw`` and the same with ``M^2 w^2``.
    """
    M = bath.mass
    r2 = _fluct_integral(lambda w: _fluct_weight(w, bath), bath, qc, "<R^2>")
    p2 = _fluct_integral(lambda w: M * M * w * w * _fluct_weight(w, bath), bath, qc, "<P_R^2>")
    return r2, p2


# ---------------------------------------------------------------------------
# exact Gaussian moments of the generalized Langevin equation
#   M R'' = -M w0^2 R - int_0^t gamma(t-s) R'(s) ds - gamma(t) R(0) + eta(t)
# with gamma(t) = gamma Gamma e^{-Gamma t} and <{eta(t), eta(s)}>/2 = K(t-s).

class DampedOscillatorResponse:
    """Green's function and noise-driven moments of the Drude-damped oscillator.

    The Laplace-domain Green's function is
    ``(s + Gamma) / (M s^3 + M Gamma s^2 + (M w0^2 + gamma Gamma) s + M w0^2 Gamma)``
    and is expanded in its three simple poles. On the imaginary axis it
    equals the susceptibility, so the ``t -> inf`` limit of
    :meth:`noise_covariance` reproduces :func:`stationary_R_moments`.

    The noise response at time t is ``Phi(w) = a(w) e^{iwt} - b(w)`` with
    ``a = sum_k c_k e^{p_k t} / (p_k + iw)`` and ``b = a|_{t=0}``. The
    ``|a|^2`` contribution separates into t-independent pole-pair integrals,
    so only the oscillating ``a b*`` cross terms need a quadrature per time.
    """

    def __init__(self, bath: BathSpec, qc: QuadratureConfig = DEFAULT_QUAD):
        self.bath = bath
        self.qc = qc
        M, G, w0 = bath.mass, bath.Gamma, bath.omega0
        poly = np.array([M, M * G, M * w0 ** 2 + bath.gamma * G, M * w0 ** 2 * G], dtype=complex)
        roots = np.roots(poly)
        scale = max(G, w0, 1.0)
        gaps = [abs(roots[i] - roots[j]) for i in range(3) for j in range(i + 1, 3)]
        if min(gaps) < 1e-7 * scale:
            raise NumericDomainError("Green's function has a (near-)degenerate pole")
        dpoly = np.polyder(poly)
        self.poles = roots
        self.res_g = (roots + G) / np.polyval(dpoly, roots)
        self.res_gdot = roots * self.res_g
        self.res_gddot = roots * self.res_gdot
        # plain complex scalars keep the quadrature integrands cheap
        self._p = [complex(z) for z in roots]
        self._c = [complex(z) for z in self.res_g]
        self._d = [complex(z) for z in self.res_gdot]
        self._edges, self._w_max = self._panels()
        self._stationary = None
        self._pairs = None

    # -- Green's function -------------------------------------------------

    def green(self, t: float) -> tuple[float, float, float]:
        """``G(t), G'(t), G''(t)``."""
        e = np.exp(self.poles * t)
        return (
            float(np.real(np.sum(self.res_g * e))),
            float(np.real(np.sum(self.res_gdot * e))),
            float(np.real(np.sum(self.res_gddot * e))),
        )

    def propagator(self, t: float) -> np.ndarray:
        """Homogeneous map of ``(R, P)``: ``R = M G' R0 + G P0``, ``P = M^2 G'' R0 + M G' P0``."""
        if t == 0:
            return np.eye(2)
        g, gd, gdd = self.green(t)
        M = self.bath.mass
        return np.array([[M * gd, g], [M * M * gdd, M * gd]])

    # -- frequency integrals ----------------------------------------------

    def _panels(self):
        bath = self.bath
        wr = resonance_frequency(bath) if bath.gamma > 0 else bath.omega0
        width = max(bath.gamma / bath.mass, 1e-4 * bath.omega0)
        w_max = self.qc.omega_max_factor * max(bath.Gamma, bath.omega0, bath.T)
        inner = {wr - 5 * width, wr, wr + 5 * width, 2 * bath.omega0}
        if bath.T > 0:
            inner.add(20 * bath.T)
        edges = sorted({0.0, w_max} | {p for p in inner if 0 < p < w_max})
        return edges, w_max

    def _weight(self, w: float) -> float:
        """``J(w) coth(w/2T) / pi`` in scalar arithmetic."""
        b = self.bath
        lor = b.gamma * b.Gamma ** 2 / (w * w + b.Gamma ** 2)
        if b.T == 0:
            return lor * w / math.pi
        x = w / b.T
        if x < COTH_SERIES_CUTOFF:
            return lor * (2.0 * b.T + w * w / (6.0 * b.T)) / math.pi
        return lor * w / (math.tanh(0.5 * x) if x < 80.0 else 1.0) / math.pi

    def _integrate(self, f, what: str, **kw) -> float:
        qc = self.qc
        val = sum(_quad(f, a, b, qc, what, **kw) for a, b in zip(self._edges[:-1], self._edges[1:]))
        return val + _quad(f, self._w_max, np.inf, qc, what + " tail", **kw)

    def _b(self, w: float) -> tuple[complex, complex]:
        b = bd = 0j
        for p, c, d in zip(self._p, self._c, self._d):
            den = p + 1j * w
            b += c / den
            bd += d / den
        return b, bd

    def _stationary_integrals(self) -> np.ndarray:
        def comp(i):
            def f(w):
                b, bd = self._b(w)
                z = (b * b.conjugate(), b * bd.conjugate(), bd * bd.conjugate())[i]
                return self._weight(w) * z.real
            return f

        return np.array([self._integrate(comp(i), "Langevin moments") for i in range(3)])

    def _pair_integrals(self) -> np.ndarray:
        """``I_kl = int g(w) / ((p_k + iw) conj(p_l + iw)) dw``; Hermitian."""
        n = len(self._p)
        out = np.zeros((n, n), dtype=complex)
        for k in range(n):
            for l in range(k, n):
                pk, pl = self._p[k], self._p[l]

                def z(w, pk=pk, pl=pl):
                    return self._weight(w) / ((pk + 1j * w) * (pl + 1j * w).conjugate())

                re = self._integrate(lambda w: z(w).real, "Langevin pair")
                im = 0.0 if k == l else self._integrate(lambda w: z(w).imag, "Langevin pair")
                out[k, l] = complex(re, im)
                out[l, k] = complex(re, -im)
        return out

    def _cross_integrals(self, t: float, et: list[complex]) -> np.ndarray:
        """``-2 Re int g Z(w) e^{iwt} dw`` for the three moment combinations."""
        ca = [c * e for c, e in zip(self._c, et)]
        da = [d * e for d, e in zip(self._d, et)]

        def zvals(w):
            a = ad = b = bd = 0j
            for p, c, d, cc, dd in zip(self._p, self._c, self._d, ca, da):
                den = p + 1j * w
                a += cc / den
                ad += dd / den
                b += c / den
                bd += d / den
            g = self._weight(w)
            return (
                g * a * b.conjugate(),
                0.5 * g * (a * bd.conjugate() + b.conjugate() * ad),
                g * ad * bd.conjugate(),
            )

        out = np.zeros(3)
        for i in range(3):
            re = self._integrate(lambda w, i=i: zvals(w)[i].real, "Langevin cross", weight="cos", wvar=t)
            im = self._integrate(lambda w, i=i: zvals(w)[i].imag, "Langevin cross", weight="sin", wvar=t)
            # Re(Z e^{iwt}) = Re Z cos(wt) - Im Z sin(wt)
            out[i] = -2.0 * (re - im)
        return out

    def _moments(self, rr: float, rp: float, pp: float) -> np.ndarray:
        M = self.bath.mass
        return np.array([[rr, M * rp], [M * rp, M * M * pp]])

    def noise_covariance(self, t: float) -> np.ndarray:
        """Bath-driven part of the ``(R, P)`` covariance at time t."""
        if t < 0:
            raise ValueError("t must be >= 0")
        if t == 0 or self.bath.gamma == 0:
            return np.zeros((2, 2))
        stat = self._raw_stationary()
        et = [complex(np.exp(p * t)) for p in self._p]
        if max(abs(e) for e in et) < 1e-17:
            return self._moments(*stat)
        if self._pairs is None:
            self._pairs = self._pair_integrals()
        e = np.array(et)
        c, d = np.array(self._c) * e, np.array(self._d) * e
        I = self._pairs
        transient = np.array([
            np.real(c @ I @ c.conj()),
            np.real(c @ I @ d.conj()),
            np.real(d @ I @ d.conj()),
        ])
        return self._moments(*(stat + transient + self._cross_integrals(t, et)))

    def _raw_stationary(self) -> np.ndarray:
        if self._stationary is None:
            self._stationary = self._stationary_integrals()
        return self._stationary

    def stationary_covariance(self) -> np.ndarray:
        if self.bath.gamma == 0:
            raise ValueError("an undamped oscillator has no stationary state")
        return self._moments(*self._raw_stationary())

    def covariance(self, t: float, initial: np.ndarray) -> np.ndarray:
        phi = self.propagator(t)
        out = phi @ np.asarray(initial, dtype=float) @ phi.T + self.noise_covariance(t)
        return 0.5 * (out + out.T)
