"""Two-mode Gaussian states: covariance matrices, separability criteria,
entanglement and entropy measures.

Conventions: hbar = m = omega0 = 1, quadrature ordering (q1, p1, q2, p2),
``V_ij = <{X_i, X_j}>/2`` so that the vacuum is ``V = I/2`` and a state is
physical iff its smaller symplectic eigenvalue is at least 1/2.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    DegenerateFormError,
    NumericDomainError,
    UnphysicalStateError,
    ZeroParameterError,
)

TOL_PHYS = 1e-9
TOL_TRANSIENT = 5e-3
TOL_SYMMETRY = 1e-9

Q1, P1, Q2, P2 = range(4)


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Symmetric 4x4 second-moment matrix of (q1, p1, q2, p2).

    The constructor requires exact symmetry; use :meth:`from_array` to
    symmetrize input that is only symmetric up to rounding.
    """

    v: np.ndarray

    def __post_init__(self):
        v = np.array(self.v, dtype=float)
        if v.shape != (4, 4):
            raise ValueError(f"covariance matrix must be 4x4, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("covariance matrix has non-finite entries")
        if not np.array_equal(v, v.T):
            raise ValueError("covariance matrix is not symmetric")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_array(cls, arr, tol: float = TOL_SYMMETRY) -> "CovarianceMatrix":
        """Symmetrize ``arr`` after checking it is symmetric within ``tol``."""
        v = np.asarray(arr, dtype=float)
        if v.shape != (4, 4):
            raise ValueError(f"covariance matrix must be 4x4, got {v.shape}")
        asym = np.max(np.abs(v - v.T))
        if asym > tol * max(1.0, np.max(np.abs(v))):
            raise ValueError(f"matrix asymmetric by {asym:.3g} (tolerance {tol:g})")
        return cls(0.5 * (v + v.T))

    @classmethod
    def from_text(cls, text: str, tol: float = TOL_SYMMETRY) -> "CovarianceMatrix":
        rows = [line.split() for line in text.strip().splitlines() if line.strip()]
        if len(rows) != 4 or any(len(r) != 4 for r in rows):
            raise ValueError("expected 4 rows of 4 numbers")
        return cls.from_array([[float(x) for x in r] for r in rows], tol=tol)

    def to_text(self) -> str:
        return "\n".join(" ".join(repr(float(x)) for x in row) for row in self.v) + "\n"

    @classmethod
    def load(cls, path, tol: float = TOL_SYMMETRY) -> "CovarianceMatrix":
        with open(path) as fh:
            return cls.from_text(fh.read(), tol=tol)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    def __array__(self, dtype=None, copy=None):
        return np.array(self.v, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, CovarianceMatrix):
            return NotImplemented
        return np.array_equal(self.v, other.v)

    __hash__ = None

    def __repr__(self):
        return f"CovarianceMatrix({self.v.tolist()!r})"


def as_covariance(V) -> CovarianceMatrix:
    if isinstance(V, CovarianceMatrix):
        return V
    return CovarianceMatrix.from_array(V)


class Blocks(NamedTuple):
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    detA: float
    detB: float
    detC: float
    detV: float


@dataclass(frozen=True)
class StandardFormElements:
    a: float
    b: float
    c_plus: float
    c_minus: float

    def matrix(self) -> CovarianceMatrix:
        a, b, cp, cm = self.a, self.b, self.c_plus, self.c_minus
        return CovarianceMatrix(
            np.array(
                [[a, 0, cp, 0], [0, a, 0, cm], [cp, 0, b, 0], [0, cm, 0, b]],
                dtype=float,
            )
        )


@dataclass(frozen=True)
class SymplecticSpectrum:
    nu_minus: float
    nu_plus: float
    nu_tilde_minus: float
    nu_tilde_plus: float
    delta_V: float
    delta_V_tilde: float


@dataclass(frozen=True)
class PurityTriple:
    mu: float
    mu1: float
    mu2: float

    def __post_init__(self):
        for name in ("mu", "mu1", "mu2"):
            val = getattr(self, name)
            if not 0.0 < val <= 1.0 + 1e-12:
                raise ValueError(f"{name}={val!r} outside (0, 1]")


class PurityRegion(enum.Enum):
    SEPARABLE = "separable"
    COEXISTENCE = "coexistence"
    ENTANGLED = "entangled"
    UNPHYSICAL = "unphysical"


def _det2(m) -> float:
    return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])


def blocks(V) -> Blocks:
    """Split V into the local blocks A, B and the cross block C."""
    v = as_covariance(V).v
    A, B, C = v[:2, :2], v[2:, 2:], v[:2, 2:]
    return Blocks(A, B, C, _det2(A), _det2(B), _det2(C), float(np.linalg.det(v)))


def _uncertainty_poly(delta: float, detV: float) -> float:
    """``(nu-^2 - 1/4)(nu+^2 - 1/4)``, free of square-root cancellation."""
    return detV - 0.25 * delta + 1.0 / 16.0


def _sympl_pair(delta: float, detV: float, tol: float) -> tuple[float, float]:
    disc = delta * delta - 4.0 * detV
    if disc < -tol * max(1.0, delta * delta):
        raise NumericDomainError(f"negative discriminant {disc:.3g} in symplectic spectrum")
    # shifted roots u = nu^2 - 1/4 solve z^2 - (delta - 1/2) z + P = 0
    s = delta - 0.5
    poly = _uncertainty_poly(delta, detV)
    disc2 = s * s - 4.0 * poly
    root = math.sqrt(max(disc2, 0.0))
    if disc2 <= 0.0:  # double root; the product form would be lost to rounding
        u = w = 0.5 * s
    elif s >= 0.0:
        w = 0.5 * (s + root)
        u = poly / w if w > 0.0 else 0.0
    else:
        u = 0.5 * (s - root)
        w = poly / u
    lo, hi = 0.25 + u, 0.25 + w
    if lo < 0.0:
        if lo < -tol * max(1.0, abs(delta)):
            raise NumericDomainError(f"negative squared symplectic eigenvalue {lo:.3g}")
        lo = 0.0
    return math.sqrt(lo), math.sqrt(hi)


def symplectic_spectrum(V, tol: float = TOL_PHYS) -> SymplecticSpectrum:
    """Symplectic eigenvalues of V and of its partial transpose.

    ``nu~_{-/+} = sqrt((D~ -/+ sqrt(D~^2 - 4 det V)) / 2)`` with
    ``D~ = det A + det B - 2 det C``; the untransposed pair uses ``+2 det C``.
    The closed forms lose half the digits for eigenvalues near 1/2; there
    (positive-definite V only) the symmetric eigenproblem of
    :func:`symplectic_eigenvalues_sym` is used instead. Away from 1/2 the
    closed forms keep full relative accuracy, including small nu~_-.
    """
    bl = blocks(V)
    delta = bl.detA + bl.detB + 2.0 * bl.detC
    delta_t = bl.detA + bl.detB - 2.0 * bl.detC
    nm, npl = _sympl_pair(delta, bl.detV, tol)
    ntm, ntp = _sympl_pair(delta_t, bl.detV, tol)
    v = as_covariance(V).v
    near = lambda *nus: any(abs(x - 0.5) < _NEAR_HALF for x in nus)  # noqa: E731
    if near(nm, npl, ntm, ntp) and np.min(np.linalg.eigvalsh(v)) > 0.0:
        if near(nm, npl):
            sm, sp = _sym_eigs(v)
            nm, npl = (sm if near(nm) else nm), (sp if near(npl) else npl)
        if near(ntm, ntp):
            sm, sp = _sym_eigs(_PT @ v @ _PT)
            ntm, ntp = (sm if near(ntm) else ntm), (sp if near(ntp) else ntp)
    return SymplecticSpectrum(nm, npl, ntm, ntp, delta, delta_t)


def check_physical(V, tol: float = TOL_PHYS) -> SymplecticSpectrum:
    """Raise :class:`UnphysicalStateError` unless nu_minus >= 1/2 - tol."""
    v = as_covariance(V).v
    if np.min(np.linalg.eigvalsh(v)) <= 0.0:
        raise UnphysicalStateError("covariance matrix is not positive definite")
    spec = symplectic_spectrum(v, tol=max(tol, TOL_PHYS))
    if spec.nu_minus < 0.5 - tol:
        raise UnphysicalStateError(f"smallest symplectic eigenvalue {spec.nu_minus:.6g} < 1/2")
    return spec


def is_physical(V, tol: float = TOL_PHYS) -> bool:
    try:
        check_physical(V, tol)
    except (UnphysicalStateError, NumericDomainError):
        return False
    return True


def simon_criterion(V, tol: float = TOL_PHYS) -> float:
    """Simon's PPT function; S >= 0 iff the Gaussian state is separable."""
    check_physical(V, tol)
    bl = blocks(V)
    return bl.detV - 0.25 * (bl.detA + bl.detB + 2.0 * abs(bl.detC)) + 1.0 / 16.0


def log_negativity(V, tol: float = TOL_PHYS) -> float:
    spec = check_physical(V, tol)
    return _log_neg_from_nu(spec.nu_tilde_minus)


def _log_neg_from_nu(nu_tilde_minus: float) -> float:
    if nu_tilde_minus >= 0.5:
        return 0.0
    if nu_tilde_minus <= 0.0:
        return math.inf
    return -math.log(2.0 * nu_tilde_minus)


def duan_sum(V, a_param: float) -> tuple[float, float]:
    """Sum of EPR-like variances and its separable lower bound a^2 + 1/a^2.

    Uses ``u = |a| q1 + q2/a`` and ``v = |a| p1 - p2/a``; ``lhs < rhs``
    witnesses entanglement. A negative ``a_param`` probes the
    ``(q1 - q2, p1 + p2)`` orientation.
    """
    if a_param == 0:
        raise ZeroParameterError("a_param must be nonzero")
    v = as_covariance(V).v
    a2 = a_param * a_param
    s = math.copysign(1.0, a_param)
    var_u = a2 * v[Q1, Q1] + v[Q2, Q2] / a2 + 2.0 * s * v[Q1, Q2]
    var_v = a2 * v[P1, P1] + v[P2, P2] / a2 - 2.0 * s * v[P1, P2]
    return float(var_u + var_v), a2 + 1.0 / a2


def duan_sum_optimal(V) -> tuple[float, float]:
    """Minimize ``lhs - rhs`` of :func:`duan_sum` over the weight parameter.

    Bracketed 1-D minimization in ``log|a|`` on both signs of ``a``.
    Returns ``(a_opt, lhs - rhs)``; a negative gap witnesses entanglement.
    """
    best = None
    for sign in (1.0, -1.0):
        def gap(log_a, sign=sign):
            lhs, rhs = duan_sum(V, sign * math.exp(log_a))
            return lhs - rhs

        res = minimize_scalar(gap, bounds=(-12.0, 12.0), method="bounded",
                              options={"xatol": 1e-10})
        cand = (sign * math.exp(res.x), float(res.fun))
        if best is None or cand[1] < best[1]:
            best = cand
    return best


def epr_variances(V) -> dict[str, float]:
    """Variances of q1 +/- q2 and p1 +/- p2."""
    v = as_covariance(V).v
    return {
        "q_sum": float(v[Q1, Q1] + v[Q2, Q2] + 2 * v[Q1, Q2]),
        "q_diff": float(v[Q1, Q1] + v[Q2, Q2] - 2 * v[Q1, Q2]),
        "p_sum": float(v[P1, P1] + v[P2, P2] + 2 * v[P1, P2]),
        "p_diff": float(v[P1, P1] + v[P2, P2] - 2 * v[P1, P2]),
    }


def duan_product(V, tol: float = TOL_PHYS) -> float:
    """Product EPR witness at a = 1, minimized over the two orientations.

    ``min(Var(q1+q2) Var(p1-p2), Var(q1-q2) Var(p1+p2))``; a value below 1
    witnesses entanglement.
    """
    check_physical(V, tol)
    e = epr_variances(V)
    return min(e["q_sum"] * e["p_diff"], e["q_diff"] * e["p_sum"])


def purities(V, tol: float = TOL_PHYS) -> PurityTriple:
    """Global and marginal purities, ``mu = 1/(4 sqrt(det V))``, ``mu_j = 1/(2 sqrt(det block))``."""
    check_physical(V, tol)
    bl = blocks(V)
    return PurityTriple(
        min(1.0, 1.0 / (4.0 * math.sqrt(bl.detV))),
        min(1.0, 1.0 / (2.0 * math.sqrt(bl.detA))),
        min(1.0, 1.0 / (2.0 * math.sqrt(bl.detB))),
    )


def purity_bounds(p: PurityTriple) -> dict[str, float]:
    m1, m2 = p.mu1, p.mu2
    prod = m1 * m2
    upper_den = prod - abs(m1 - m2)
    return {
        "physical_lower": prod,
        "separable_upper": prod / (m1 + m2 - prod),
        "entangled_lower": prod / math.sqrt(m1 * m1 + m2 * m2 - prod * prod),
        "entangled_upper": prod / upper_den if upper_den > 0 else math.inf,
    }


def purity_region(p: PurityTriple, rtol: float = 1e-9) -> PurityRegion:
    """Classify a state by its global and marginal purities."""
    b = purity_bounds(p)
    mu = p.mu
    if mu < b["physical_lower"] * (1 - rtol):
        return PurityRegion.UNPHYSICAL
    if mu <= b["separable_upper"] * (1 + rtol):
        return PurityRegion.SEPARABLE
    if mu <= b["entangled_lower"]:
        return PurityRegion.COEXISTENCE
    # mu1 == mu2 leaves no upper constraint beyond mu <= 1
    upper = b["entangled_upper"] if p.mu1 != p.mu2 else math.inf
    if mu <= upper * (1 + rtol):
        return PurityRegion.ENTANGLED
    return PurityRegion.UNPHYSICAL


def entropy_f(nu: float) -> float:
    """Von Neumann entropy of a single-mode thermal state with symplectic eigenvalue nu."""
    if nu <= 0.5:
        return 0.0
    lo = nu - 0.5
    return (nu + 0.5) * math.log(nu + 0.5) - lo * math.log(lo)


def marginal_entropy(mu: float) -> float:
    """Single-mode entropy from the purity."""
    if mu >= 1.0:
        return 0.0
    return (1 - mu) / (2 * mu) * math.log((1 + mu) / (1 - mu)) - math.log(2 * mu / (1 + mu))


_OMEGA = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))


_NEAR_HALF = 1e-6

# partial transposition: p2 -> -p2
_PT = np.diag([1.0, 1.0, 1.0, -1.0])


def _sym_eigs(v: np.ndarray) -> tuple[float, float]:
    w, u = np.linalg.eigh(v)
    root = (u * np.sqrt(w)) @ u.T
    m = root @ _OMEGA @ v @ _OMEGA.T @ root
    nu2 = np.sort(np.linalg.eigvalsh(0.5 * (m + m.T)))
    return math.sqrt(max(nu2[0], 0.0)), math.sqrt(max(nu2[-1], 0.0))


def symplectic_eigenvalues_sym(V) -> tuple[float, float]:
    """(nu-, nu+) from the symmetric matrix ``V^1/2 Omega V Omega^T V^1/2``.

    Eigenvalues of a symmetric matrix are perturbed linearly rather than as
    a square root, so this route stays accurate for near-pure states.
    """
    v = as_covariance(V).v
    if np.min(np.linalg.eigvalsh(v)) <= 0:
        raise UnphysicalStateError("covariance matrix is not positive definite")
    return _sym_eigs(v)


def von_neumann_entropies(V, tol: float = TOL_PHYS) -> tuple[float, float, float]:
    check_physical(V, tol)
    p = purities(V, tol)
    nu_minus, nu_plus = symplectic_eigenvalues_sym(V)
    total = entropy_f(nu_minus) + entropy_f(nu_plus)
    return total, marginal_entropy(p.mu1), marginal_entropy(p.mu2)


def mutual_information(V, tol: float = TOL_PHYS) -> float:
    s, s1, s2 = von_neumann_entropies(V, tol)
    return max(0.0, s1 + s2 - s)


def _has_standard_pattern(v: np.ndarray, rtol: float = 1e-12) -> bool:
    scale = max(1.0, float(np.max(np.abs(v))))
    mask = np.ones((4, 4), dtype=bool)
    for i, j in [(0, 0), (1, 1), (2, 2), (3, 3), (0, 2), (2, 0), (1, 3), (3, 1)]:
        mask[i, j] = False
    return (
        np.max(np.abs(v[mask])) <= rtol * scale
        and abs(v[0, 0] - v[1, 1]) <= rtol * scale
        and abs(v[2, 2] - v[3, 3]) <= rtol * scale
    )


def standard_form(V, tol: float = TOL_PHYS) -> StandardFormElements:
    """Standard-form elements (a, b, c+, c-) from the four local invariants.

    Convention for general input: ``c+ >= |c-|``, ``c+ >= 0`` and
    ``sign(c-) = sign(det C)``. Matrices already in standard form are returned
    unchanged.
    """
    cov = as_covariance(V)
    check_physical(cov, tol)
    v = cov.v
    if _has_standard_pattern(v):
        return StandardFormElements(float(v[0, 0]), float(v[2, 2]), float(v[0, 2]), float(v[1, 3]))
    bl = blocks(cov)
    a, b = math.sqrt(bl.detA), math.sqrt(bl.detB)
    ab = a * b
    s = (ab * ab + bl.detC ** 2 - bl.detV) / ab  # c+^2 + c-^2
    disc = s * s - 4.0 * bl.detC ** 2
    if disc < 0:
        if disc < -max(tol, 1e-9) * max(1.0, s * s):
            raise DegenerateFormError(f"no real standard form (discriminant {disc:.3g})")
        disc = 0.0
    root = math.sqrt(disc)
    x_hi, x_lo = 0.5 * (s + root), max(0.0, 0.5 * (s - root))
    c_plus = math.sqrt(x_hi)
    c_minus = math.copysign(math.sqrt(x_lo), bl.detC) if bl.detC != 0 else 0.0
    return StandardFormElements(a, b, c_plus, c_minus)


@dataclass(frozen=True)
class SeparabilityVerdict:
    simon_S: float
    log_negativity: float
    duan_product_lhs: float
    purity_region: PurityRegion
    is_entangled_ppt: bool
    nu_tilde_minus: float
    cov: CovarianceMatrix

    def duan_sum_lhs(self, a_param: float) -> float:
        return duan_sum(self.cov, a_param)[0]


def separability_verdict(V, tol: float = TOL_PHYS) -> SeparabilityVerdict:
    cov = as_covariance(V)
    spec = check_physical(cov, tol)
    return SeparabilityVerdict(
        simon_S=simon_criterion(cov, tol),
        log_negativity=_log_neg_from_nu(spec.nu_tilde_minus),
        duan_product_lhs=duan_product(cov, tol),
        purity_region=purity_region(purities(cov, tol)),
        is_entangled_ppt=spec.nu_tilde_minus < 0.5,
        nu_tilde_minus=spec.nu_tilde_minus,
        cov=cov,
    )


# ---------------------------------------------------------------------------
# State constructors and symplectic helpers

def vacuum() -> CovarianceMatrix:
    return CovarianceMatrix(0.5 * np.eye(4))


def two_mode_squeezed_vacuum(xi: float) -> CovarianceMatrix:
    """Two-mode squeezed vacuum: a = cosh(2xi)/2, c+ = -c- = sinh(2xi)/2."""
    return StandardFormElements(
        0.5 * math.cosh(2 * xi), 0.5 * math.cosh(2 * xi),
        0.5 * math.sinh(2 * xi), -0.5 * math.sinh(2 * xi),
    ).matrix()


def thermal_state(nbar1: float, nbar2: float | None = None) -> CovarianceMatrix:
    nbar2 = nbar1 if nbar2 is None else nbar2
    return CovarianceMatrix(np.diag([nbar1 + 0.5, nbar1 + 0.5, nbar2 + 0.5, nbar2 + 0.5]))


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


def squeezer(r: float) -> np.ndarray:
    return np.diag([math.exp(-r), math.exp(r)])


def local_symplectic(S1: np.ndarray, S2: np.ndarray) -> np.ndarray:
    out = np.zeros((4, 4))
    out[:2, :2] = S1
    out[2:, 2:] = S2
    return out


def beam_splitter(theta: float) -> np.ndarray:
    """Passive two-mode mixing; symplectic in the (q1, p1, q2, p2) ordering."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 0, s, 0], [0, c, 0, s], [-s, 0, c, 0], [0, -s, 0, c]])


def two_mode_squeezer(r: float) -> np.ndarray:
    ch, sh = math.cosh(r), math.sinh(r)
    return np.array([[ch, 0, sh, 0], [0, ch, 0, -sh], [sh, 0, ch, 0], [0, -sh, 0, ch]])


def transform(V, S: np.ndarray) -> CovarianceMatrix:
    v = as_covariance(V).v
    out = S @ v @ S.T
    return CovarianceMatrix(0.5 * (out + out.T))


def random_covariance(rng: np.random.Generator, max_nu: float = 3.0,
                      max_squeeze: float = 1.2) -> CovarianceMatrix:
    """Random physical two-mode covariance matrix.

    Williamson form ``diag(nu1, nu1, nu2, nu2)`` with ``nu_j >= 1/2`` dressed
    by local rotations and squeezers around a two-mode mixing element, so the
    result is physical by construction.
    """
    nu1, nu2 = 0.5 + rng.uniform(0.0, max_nu - 0.5, size=2) * rng.uniform(0, 1, size=2)
    v = np.diag([nu1, nu1, nu2, nu2])

    def local():
        return local_symplectic(
            rotation(rng.uniform(0, 2 * np.pi)) @ squeezer(rng.uniform(-max_squeeze, max_squeeze)),
            rotation(rng.uniform(0, 2 * np.pi)) @ squeezer(rng.uniform(-max_squeeze, max_squeeze)),
        )

    S = local() @ beam_splitter(rng.uniform(0, np.pi)) @ local()
    if rng.uniform() < 0.5:
        S = S @ two_mode_squeezer(rng.uniform(-max_squeeze, max_squeeze))
    return transform(v, S)
