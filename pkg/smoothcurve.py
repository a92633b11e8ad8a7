"""Curves reconstructed from curvature and the closedness conditions of an affine family k + λf."""
import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from exceptions import CriticalValue, DomainError, ValidationError
from fungrid import (
    CRITICAL_BAND,
    TWO_PI,
    SampledFunction,
    UniformGrid,
    cumulative,
    derivative,
    find_level_crossings,
    quadrature,
)

logger = logging.getLogger(__name__)

DEFAULT_LAMBDAS = tuple(np.round(np.arange(-5.0, 5.0 + 0.25, 0.5), 10))
DEFAULT_MOMENT_RANGE = 12
MAX_MOMENT_ORDER = 24
STENCIL_ACCURACY = 6
STENCIL_STEP = TWO_PI / 512
# residual slack over the estimated error of the two one-sided stencils
STENCIL_MARGIN = 4.0
LEVEL_BOUNDARY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PlanarCurveSamples:
    """Points γ(t_j) of an arc-length parametrized curve starting at the origin"""

    grid: UniformGrid
    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.shape != (self.grid.n_samples, 2):
            raise ValidationError(f"expected {self.grid.n_samples} planar points, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise ValidationError("curve points must be finite")
        if np.hypot(*points[0]) > 1e-12:
            raise ValidationError("curve must start at the origin")
        chords = np.hypot(*np.diff(points, axis=0).T)
        if chords.max() > 1.5 * self.grid.spacing:
            raise ValidationError("chord longer than 1.5× grid spacing; curve is not arc-length parametrized")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @property
    def endpoint(self) -> np.ndarray:
        return self.points[-1]

    def as_complex(self) -> np.ndarray:
        return self.points[:, 0] + 1j * self.points[:, 1]


@dataclass(frozen=True)
class ClosureReport:
    """Closure defects |F(λ)| over a list of λ values"""

    lambda_values: Tuple[float, ...]
    defects: Tuple[float, ...]
    tolerance: float

    @property
    def max_defect(self) -> float:
        return max(self.defects)

    @property
    def passed(self) -> bool:
        return self.max_defect <= self.tolerance

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["lambda", "defect"])
            for lam, defect in zip(self.lambda_values, self.defects):
                writer.writerow([f"{lam:.17g}", f"{defect:.17g}"])


class LevelRoot(NamedTuple):
    t: float
    theta: float
    abs_phi_prime: float


@dataclass(frozen=True)
class LevelSetReport:
    """Preimage of a level a under φ and the weighted sum Σ e^{iθ(b)}/|φ′(b)|"""

    level: float
    roots: Tuple[LevelRoot, ...]
    weighted_sum: complex
    boundary_excluded: bool

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["root", "theta_at_root", "abs_phi_prime", "partial_sum_re", "partial_sum_im"])
            partial = 0j
            for root in self.roots:
                partial += np.exp(1j * root.theta) / root.abs_phi_prime
                writer.writerow([f"{root.t:.17g}", f"{root.theta:.17g}", f"{root.abs_phi_prime:.17g}",
                                 f"{partial.real:.17g}", f"{partial.imag:.17g}"])


class BoundaryBranch(Enum):
    EVEN = "even"
    ODD = "odd"
    VIOLATION = "violation"


@dataclass(frozen=True)
class BoundaryReport:
    """Endpoint relations between θ and φ; residual lists are indexed by derivative order 0..h"""

    phi_endpoint_match: bool
    branch: BoundaryBranch
    even_residuals: Tuple[float, ...]
    odd_residuals: Tuple[float, ...]
    tolerances: Tuple[float, ...]

    @property
    def derivative_residuals(self) -> Tuple[float, ...]:
        if self.branch is BoundaryBranch.ODD:
            return self.odd_residuals
        if self.branch is BoundaryBranch.EVEN:
            return self.even_residuals
        even = max(r / t for r, t in zip(self.even_residuals, self.tolerances))
        odd = max(r / t for r, t in zip(self.odd_residuals, self.tolerances))
        return self.even_residuals if even <= odd else self.odd_residuals


def turning_angle(k: SampledFunction) -> SampledFunction:
    """θ(t) = ∫₀^t k."""
    return cumulative(k)


def curve_from_angle(theta: SampledFunction) -> PlanarCurveSamples:
    """Curve with unit tangent e^{iθ}, started at the origin."""
    x = cumulative(theta.map(np.cos))
    y = cumulative(theta.map(np.sin))
    return PlanarCurveSamples(theta.grid, np.column_stack([x.values, y.values]))


def f_of_lambda(theta: SampledFunction, phi: SampledFunction, lam: float) -> complex:
    """F(λ) = ∫₀^{2π} e^{i(θ+λφ)} dt."""
    integrand = np.exp(1j * (theta.values + lam * phi.values))
    return quadrature(theta.grid, integrand)


def closure_profile(theta: SampledFunction) -> Tuple[float, float]:
    """Endpoint γ(2π) of the curve started at the origin."""
    endpoint = quadrature(theta.grid, np.exp(1j * theta.values))
    return float(endpoint.real), float(endpoint.imag)


def closure_defect(theta: SampledFunction) -> float:
    """|γ(2π) − γ(0)| of the curve with turning angle θ."""
    return float(np.hypot(*closure_profile(theta)))


def _check_order(n: int, max_order: int) -> None:
    if n < 0 or int(n) != n:
        raise ValueError(f"moment order must be a nonnegative integer, got {n}")
    if n > max_order:
        raise ValueError(f"moment order {n} exceeds configured maximum {max_order}")


def _power_of(scale: float, n: int) -> float:
    # scale**n with the binary exponent handled separately
    mantissa, exponent = math.frexp(scale)
    return math.ldexp(mantissa ** n, exponent * n)


def normalized_moment(theta: SampledFunction, phi: SampledFunction, n: int,
                      max_order: int = MAX_MOMENT_ORDER) -> complex:
    """∫ e^{iθ} (φ/sup|φ|)ⁿ dt; equals moment(n) up to the factor (sup|φ|)ⁿ."""
    _check_order(n, max_order)
    scale = phi.sup_norm()
    if n == 0:
        return quadrature(theta.grid, np.exp(1j * theta.values))
    if scale == 0.0:
        return 0j
    integrand = np.exp(1j * theta.values) * (phi.values / scale) ** n
    return quadrature(theta.grid, integrand)


def moment(theta: SampledFunction, phi: SampledFunction, n: int, max_order: int = MAX_MOMENT_ORDER) -> complex:
    """∫₀^{2π} e^{iθ(t)} φ(t)ⁿ dt."""
    value = normalized_moment(theta, phi, n, max_order)
    if n == 0 or value == 0:
        return value
    return value * _power_of(phi.sup_norm(), n)


def moment_profile(theta: SampledFunction, phi: SampledFunction, n_max: int = DEFAULT_MOMENT_RANGE,
                   normalized: bool = False) -> List[complex]:
    compute = normalized_moment if normalized else moment
    return [compute(theta, phi, n, max(n_max, MAX_MOMENT_ORDER)) for n in range(n_max + 1)]


def series_coefficient(theta: SampledFunction, phi: SampledFunction, n: int,
                       max_order: int = MAX_MOMENT_ORDER) -> complex:
    """F⁽ⁿ⁾(0)/n! = iⁿ·moment(n)/n!."""
    i_power = (1, 1j, -1, -1j)[n % 4]
    return i_power * moment(theta, phi, n, max_order) / math.factorial(n)


def taylor_partial_sum(theta: SampledFunction, phi: SampledFunction, lam: float, order: int) -> complex:
    return sum(series_coefficient(theta, phi, n, max(order, MAX_MOMENT_ORDER)) * lam ** n
               for n in range(order + 1))


def taylor_remainder_bound(phi: SampledFunction, lam: float, order: int) -> float:
    return 2.0 * (phi.sup_norm() * abs(lam)) ** (order + 1) / math.factorial(order + 1) * TWO_PI


def composed_moment(theta: SampledFunction, phi: SampledFunction, g: Callable[[np.ndarray], np.ndarray],
                    n: int, max_order: int = MAX_MOMENT_ORDER) -> complex:
    """∫ e^{iθ} g(φ)ⁿ dt for a scalar generator g."""
    _check_order(n, max_order)
    domain = getattr(g, "domain", None)
    lo, hi = float(phi.values.min()), float(phi.values.max())
    if domain is not None and (lo < domain[0] or hi > domain[1]):
        raise DomainError(f"generator defined on [{domain[0]:.6g}, {domain[1]:.6g}] but φ ranges over [{lo:.6g}, {hi:.6g}]")
    with np.errstate(all="ignore"):
        composed = np.asarray(g(phi.values), dtype=float)
    if composed.shape != phi.values.shape:
        composed = np.broadcast_to(composed, phi.values.shape)
    if not np.all(np.isfinite(composed)):
        raise DomainError("generator is undefined on part of the range of φ")
    return moment(theta, SampledFunction.detect(theta.grid, composed), n, max_order)


def level_set_condition(theta: SampledFunction, phi: SampledFunction, a: float) -> LevelSetReport:
    """Σ e^{iθ(t)}/|φ′(t)| over the roots of φ = a."""
    crossings = find_level_crossings(phi, a)
    roots = []
    total = 0j
    for t, slope in crossings:
        angle = float(theta(t))
        roots.append(LevelRoot(t=t, theta=angle, abs_phi_prime=abs(slope)))
        total += np.exp(1j * angle) / abs(slope)
    return LevelSetReport(level=float(a), roots=tuple(roots), weighted_sum=complex(total),
                          boundary_excluded=not crossings.touches_boundary)


@dataclass(frozen=True)
class LevelScanEntry:
    level: float
    report: Optional[LevelSetReport]
    skipped: str = ""


def level_set_scan(theta: SampledFunction, phi: SampledFunction, levels: Sequence[float]) -> List[LevelScanEntry]:
    """level_set_condition at each level, skipping critical and boundary levels."""
    entries = []
    for a in levels:
        try:
            report = level_set_condition(theta, phi, a)
        except CriticalValue as e:
            entries.append(LevelScanEntry(level=float(a), report=None, skipped=str(e)))
            continue
        if not report.boundary_excluded:
            entries.append(LevelScanEntry(level=float(a), report=None, skipped="boundary value of φ"))
            continue
        entries.append(LevelScanEntry(level=float(a), report=report))
    return entries


def sample_regular_levels(phi: SampledFunction, count: int = 9) -> List[float]:
    lo, hi = float(phi.values.min()), float(phi.values.max())
    if hi - lo <= 0.0:
        return []
    return [float(a) for a in np.linspace(lo, hi, count + 2)[1:-1]]


def family_scan(k: SampledFunction, f: SampledFunction, lambdas: Sequence[float] = DEFAULT_LAMBDAS,
                tolerance: float = 1e-7, workers: int = 1) -> ClosureReport:
    """Closure defect of k + λf for every λ."""
    if len(lambdas) == 0:
        raise ValueError("lambdas must be nonempty")
    theta, phi = turning_angle(k), turning_angle(f)
    return angle_family_scan(theta, phi, lambdas, tolerance, workers)


def angle_family_scan(theta: SampledFunction, phi: SampledFunction, lambdas: Sequence[float],
                      tolerance: float, workers: int = 1) -> ClosureReport:
    def defect(lam: float) -> float:
        return abs(f_of_lambda(theta, phi, lam))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            defects = list(pool.map(defect, lambdas))
    else:
        defects = [defect(lam) for lam in lambdas]
    return ClosureReport(lambda_values=tuple(float(x) for x in lambdas),
                         defects=tuple(float(d) for d in defects), tolerance=float(tolerance))


def total_turning(theta: SampledFunction) -> float:
    """θ(2π) − θ(0)."""
    return float(theta.values[-1] - theta.values[0])


def one_sided_weights(order: int, n_points: int) -> np.ndarray:
    """Forward finite-difference weights on offsets 0..n_points-1 for the given derivative order."""
    offsets = np.arange(n_points, dtype=float)
    powers = np.arange(n_points)[:, None]
    system = offsets[None, :] ** powers / np.array([math.factorial(p) for p in range(n_points)])[:, None]
    rhs = np.zeros(n_points)
    rhs[order] = 1.0
    return np.linalg.solve(system, rhs)


def _stencil(fun: SampledFunction, order: int, n_points: int) -> Tuple[int, float]:
    stride = max(1, int(round(STENCIL_STEP / fun.grid.spacing)))
    while stride > 1 and (n_points - 1) * stride >= fun.grid.n_samples:
        stride -= 1
    if (n_points - 1) * stride >= fun.grid.n_samples:
        raise ValidationError(f"grid too coarse for a derivative of order {order}")
    return stride, stride * fun.grid.spacing


def endpoint_derivatives(fun: SampledFunction, order: int,
                         n_points: Optional[int] = None) -> Tuple[float, float]:
    """One-sided derivatives of the given order at t = 0 and t = 2π."""
    if n_points is None:
        n_points = order + STENCIL_ACCURACY
    stride, step = _stencil(fun, order, n_points)
    weights = one_sided_weights(order, n_points)
    left = fun.values[0:n_points * stride:stride]
    right = fun.values[::-1][0:n_points * stride:stride]
    # a backward stencil is the forward one with odd orders negated
    sign = (-1) ** order
    return float(weights @ left / step ** order), float(sign * (weights @ right) / step ** order)


def endpoint_error(fun: SampledFunction, order: int) -> float:
    """Error bound for both one-sided derivatives: rounding plus the gap to a lower-accuracy stencil."""
    n_points = order + STENCIL_ACCURACY
    _, step = _stencil(fun, order, n_points)
    weights = one_sided_weights(order, n_points)
    rounding = np.finfo(float).eps * fun.sup_norm() * float(np.abs(weights).sum()) / step ** order
    fine = endpoint_derivatives(fun, order, n_points)
    coarse = endpoint_derivatives(fun, order, n_points - 1)
    truncation = max(abs(fine[0] - coarse[0]), abs(fine[1] - coarse[1]))
    return 2.0 * rounding + truncation


def _distance_to_lattice(value: float, offset: float) -> float:
    shifted = (value - offset) / TWO_PI
    return abs(shifted - round(shifted)) * TWO_PI


def boundary_check(theta: SampledFunction, phi: SampledFunction, h: int = 3,
                   tolerance: float = 1e-6) -> BoundaryReport:
    """Match the one-sided derivatives of θ and φ at 0 and 2π against the even and odd boundary relations."""
    if h < 1:
        raise ValueError("boundary order h must be positive")
    phi_slope = derivative(phi)
    sup_slope = phi_slope.sup_norm()
    left_slope, _ = endpoint_derivatives(phi, 1)
    if sup_slope == 0.0 or abs(left_slope) < CRITICAL_BAND * sup_slope:
        raise CriticalValue("φ(0) is a critical value; the boundary relations are not determined",
                            level=float(phi.values[0]))

    tolerances = [tolerance]

    phi_gap = abs(phi.values[0] - phi.values[-1])
    gap = total_turning(theta)
    even = [max(phi_gap, _distance_to_lattice(gap, 0.0))]
    odd = [max(phi_gap, _distance_to_lattice(gap, math.pi))]
    for order in range(1, h + 1):
        phi_left, phi_right = endpoint_derivatives(phi, order)
        even_r = abs(phi_left - phi_right)
        odd_r = abs(phi_left - (-1) ** order * phi_right)
        if order <= h - 1:
            theta_left, theta_right = endpoint_derivatives(theta, order)
            even_r = max(even_r, abs(theta_left - theta_right))
            odd_r = max(odd_r, abs(theta_left - (-1) ** order * theta_right))
        error = endpoint_error(phi, order)
        if order <= h - 1:
            error += endpoint_error(theta, order)
        tolerances.append(max(tolerance, STENCIL_MARGIN * error))
        even.append(even_r)
        odd.append(odd_r)

    even_score = max(r / t for r, t in zip(even, tolerances))
    odd_score = max(r / t for r, t in zip(odd, tolerances))
    if even_score <= 1.0 and odd_score <= 1.0:
        logger.warning("both boundary branches fit (even %.3g, odd %.3g); input looks degenerate",
                       even_score, odd_score)
        branch = BoundaryBranch.EVEN if even_score <= odd_score else BoundaryBranch.ODD
    elif even_score <= 1.0:
        branch = BoundaryBranch.EVEN
    elif odd_score <= 1.0:
        branch = BoundaryBranch.ODD
    else:
        branch = BoundaryBranch.VIOLATION
    return BoundaryReport(phi_endpoint_match=phi_gap <= tolerance, branch=branch,
                          even_residuals=tuple(even), odd_residuals=tuple(odd),
                          tolerances=tuple(tolerances))
