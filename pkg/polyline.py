"""Unit-edge polylines, their discrete closedness conditions and balanced edge subsets.

Vertices are numbered v_1..v_N. The first edge v_2 - v_1 is the fixed direction
θ_1 = 0; interior vertices j = 2..N-1 carry the curvature k_j and the turning angle
θ_j of the edge leaving them. Arrays indexed by interior vertex start at j = 2.
"""
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from exceptions import (
    ConstructionError,
    PairFormatError,
    PolylineNotClosed,
    SearchCapExceeded,
    UnbalancedSubset,
    ValidationError,
)
from smoothcurve import ClosureReport

logger = logging.getLogger(__name__)

EDGE_TOL = 1e-12
LEVEL_MATCH_TOL = 1e-9
BALANCE_TOL = 1e-9
NEAR_BALANCE_FACTOR = 100.0
SUBSET_CAP = 22
LOW_BITS = 12
CONDITION_TOL = 1e-10
DISCRETE_LAMBDAS = tuple(float(x) for x in range(-10, 11))


@dataclass(frozen=True, eq=False)
class Polyline:
    """Planar vertices joined by unit-length edges"""

    vertices: np.ndarray

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise ValidationError(f"vertices must be an (N, 2) array, got shape {vertices.shape}")
        if vertices.shape[0] < 3:
            raise ValidationError(f"a polyline needs at least 3 vertices, got {vertices.shape[0]}")
        lengths = np.hypot(*np.diff(vertices, axis=0).T)
        worst = int(np.argmax(np.abs(lengths - 1.0)))
        if abs(lengths[worst] - 1.0) > EDGE_TOL:
            raise ValidationError(f"edge {worst + 1} has length {lengths[worst]:.17g}, expected 1")
        vertices.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def as_complex(self) -> np.ndarray:
        return self.vertices[:, 0] + 1j * self.vertices[:, 1]

    def edges(self) -> np.ndarray:
        return np.diff(self.as_complex())


@dataclass(frozen=True, eq=False)
class DiscreteAngles:
    """k_j and θ_j = Σ_{r≤j} k_r for the interior vertices j = 2..N-1"""

    curvature: np.ndarray
    turning: np.ndarray

    def __post_init__(self):
        curvature = np.array(self.curvature, dtype=float)
        turning = np.array(self.turning, dtype=float)
        if curvature.ndim != 1 or curvature.size == 0 or curvature.shape != turning.shape:
            raise ValidationError("curvature and turning must be matching nonempty vectors")
        if np.abs(np.cumsum(curvature) - turning).max() > 1e-12 * max(1.0, np.abs(turning).max()):
            raise ValidationError("turning angles are not the partial sums of the curvature")
        for name, values in (("curvature", curvature), ("turning", turning)):
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    @classmethod
    def from_curvature(cls, curvature: Sequence[float]) -> "DiscreteAngles":
        curvature = np.asarray(curvature, dtype=float)
        return cls(curvature, np.cumsum(curvature))

    @classmethod
    def from_turning(cls, turning: Sequence[float]) -> "DiscreteAngles":
        turning = np.asarray(turning, dtype=float)
        return cls(np.diff(turning, prepend=0.0), turning)

    @property
    def n_interior(self) -> int:
        return self.curvature.size

    @property
    def indices(self) -> np.ndarray:
        return np.arange(2, self.n_interior + 2)

    def directions(self) -> np.ndarray:
        return np.exp(1j * self.turning)


@dataclass(frozen=True, eq=False)
class DiscretePhi:
    """Deformation direction f_j and its partial sums φ_j"""

    f: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        f = np.array(self.f, dtype=float)
        phi = np.array(self.phi, dtype=float)
        if f.ndim != 1 or f.shape != phi.shape:
            raise ValidationError("f and φ must be matching vectors")
        if f.size and np.abs(np.cumsum(f) - phi).max() > 1e-12 * max(1.0, np.abs(phi).max()):
            raise ValidationError("φ is not the partial sum of f")
        for name, values in (("f", f), ("phi", phi)):
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    @classmethod
    def from_f(cls, f: Sequence[float]) -> "DiscretePhi":
        f = np.asarray(f, dtype=float)
        return cls(f, np.cumsum(f))

    @classmethod
    def from_phi(cls, phi: Sequence[float]) -> "DiscretePhi":
        phi = np.asarray(phi, dtype=float)
        return cls(np.diff(phi, prepend=0.0), phi)

    @classmethod
    def zero(cls, n_interior: int) -> "DiscretePhi":
        return cls.from_f(np.zeros(n_interior))


def _check_matching(angles: DiscreteAngles, phi: DiscretePhi) -> None:
    if phi.f.size != angles.n_interior:
        raise ValidationError(f"φ has {phi.f.size} entries for {angles.n_interior} interior vertices")


def polyline_from_curvature(curvature: Sequence[float]) -> Polyline:
    """v_1 = 0, v_2 = 1, v_{j+1} = v_j + e^{iθ_j}."""
    curvature = np.asarray(curvature, dtype=float)
    if curvature.size < 1:
        raise ValidationError("need at least one interior curvature value (N ≥ 3)")
    edges = np.concatenate([[1.0 + 0j], np.exp(1j * np.cumsum(curvature))])
    points = np.concatenate([[0j], np.cumsum(edges)])
    return Polyline(np.column_stack([points.real, points.imag]))


def discrete_angles_from_polyline(polyline: Polyline) -> DiscreteAngles:
    """Exterior angles between consecutive edges, measured relative to the first edge."""
    edges = polyline.edges()
    turn = edges[1:] * np.conj(edges[:-1])
    return DiscreteAngles.from_curvature(np.arctan2(turn.imag, turn.real))


def discrete_closure_defect(polyline: Polyline) -> float:
    """|last vertex − first vertex|."""
    return float(np.hypot(*(polyline.vertices[-1] - polyline.vertices[0])))


def discrete_moment(angles: DiscreteAngles, phi: DiscretePhi, n: int) -> complex:
    """Σ_{j=2}^{N-1} e^{iθ_j} φ_jⁿ."""
    _check_matching(angles, phi)
    if n < 0 or int(n) != n:
        raise ValueError(f"moment order must be a nonnegative integer, got {n}")
    return complex(np.sum(angles.directions() * phi.phi ** int(n)))


def discrete_level_sum(angles: DiscreteAngles, phi: DiscretePhi, a: float,
                       match_tol: float = LEVEL_MATCH_TOL) -> complex:
    """Σ e^{iθ_j} over the interior vertices with φ_j = a."""
    _check_matching(angles, phi)
    members = np.abs(phi.phi - a) <= match_tol
    return complex(np.sum(angles.directions()[members]))


def discrete_family_scan(angles: DiscreteAngles, phi: DiscretePhi,
                         lambdas: Sequence[float] = DISCRETE_LAMBDAS,
                         tolerance: float = 1e-12) -> ClosureReport:
    """Closure defect of the polyline with angles θ_j + λφ_j for every λ."""
    _check_matching(angles, phi)
    if len(lambdas) == 0:
        raise ValueError("lambdas must be nonempty")
    base = discrete_closure_defect(polyline_from_curvature(angles.curvature))
    if base > tolerance:
        raise PolylineNotClosed(f"base polyline is open (defect {base:.3e} > {tolerance:.1e})")
    defects = [discrete_closure_defect(polyline_from_curvature(angles.curvature + lam * phi.f))
               for lam in lambdas]
    return ClosureReport(lambda_values=tuple(float(x) for x in lambdas),
                         defects=tuple(defects), tolerance=float(tolerance))


@dataclass(frozen=True)
class BalanceReport:
    """Balanced subsets of interior indices, listed by increasing cardinality"""

    subsets: Tuple[Tuple[int, ...], ...]
    residuals: Tuple[float, ...]
    near_balanced: Tuple[Tuple[int, ...], ...]
    near_residuals: Tuple[float, ...]
    tolerance: float
    exhaustive: bool
    n_interior: int

    @property
    def empty(self) -> bool:
        return not self.subsets

    def as_dict(self) -> Dict:
        return {
            "n_interior": self.n_interior,
            "tolerance": self.tolerance,
            "exhaustive": self.exhaustive,
            "balanced": [{"subset": list(s), "residual": r} for s, r in zip(self.subsets, self.residuals)],
            "near_balanced": [{"subset": list(s), "residual": r}
                              for s, r in zip(self.near_balanced, self.near_residuals)],
        }

    def to_json(self, path: str) -> None:
        with open(path, "w") as handle:
            json.dump(self.as_dict(), handle, indent=2)
            handle.write("\n")


def _subset_sum_table(directions: np.ndarray) -> np.ndarray:
    # entry m holds the sum over the set bits of m
    sums = np.zeros(1, dtype=complex)
    for d in directions:
        sums = np.concatenate([sums, sums + d])
    return sums


def _gray(p: int) -> int:
    return p ^ (p >> 1)


def _search_block(low_sums: np.ndarray, high_dirs: np.ndarray, start: int, stop: int,
                  limit: float) -> List[Tuple[int, int, float]]:
    """Scan Gray positions [start, stop) of the high bits; each step flips one high bit."""
    hits = []
    mask = _gray(start)
    high_sum = complex(sum(high_dirs[b] for b in range(high_dirs.size) if mask >> b & 1))
    for p in range(start, stop):
        if p > start:
            bit = (p & -p).bit_length() - 1
            mask ^= 1 << bit
            high_sum += high_dirs[bit] if mask >> bit & 1 else -high_dirs[bit]
        totals = np.abs(low_sums + high_sum)
        for low in np.flatnonzero(totals <= limit):
            hits.append((mask, int(low), float(totals[low])))
    return hits


def find_balanced_subsets(angles: DiscreteAngles, tolerance: float = BALANCE_TOL,
                          cap: int = SUBSET_CAP, workers: int = 1) -> BalanceReport:
    """Nonempty subsets of interior vertices whose directions sum to zero, by a Gray-code walk over split halves."""
    m = angles.n_interior
    if m > cap:
        raise SearchCapExceeded(
            f"{m} interior vertices exceed the exhaustive search cap of {cap}; raise it with --subset-cap")
    directions = angles.directions()
    low_bits = min(m, LOW_BITS)
    low_sums = _subset_sum_table(directions[:low_bits])
    high_dirs = directions[low_bits:]
    n_high = 1 << high_dirs.size
    limit = NEAR_BALANCE_FACTOR * tolerance

    blocks = max(1, min(workers, n_high))
    bounds = [n_high * b // blocks for b in range(blocks + 1)]
    jobs = list(zip(bounds[:-1], bounds[1:]))
    logger.debug("searching 2^%d subsets in %d block(s)", m, len(jobs))
    if len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
            results = list(pool.map(lambda job: _search_block(low_sums, high_dirs, *job, limit), jobs))
    else:
        results = [_search_block(low_sums, high_dirs, 0, n_high, limit)]

    full = (1 << m) - 1
    balanced, near = [], []
    for high, low, residual in (hit for block in results for hit in block):
        mask = high << low_bits | low
        if mask == 0 or mask == full:
            continue
        subset = tuple(int(b) + 2 for b in range(m) if mask >> b & 1)
        (balanced if residual <= tolerance else near).append((subset, residual))
    balanced.sort(key=lambda item: (len(item[0]), item[0]))
    near.sort(key=lambda item: (len(item[0]), item[0]))
    return BalanceReport(
        subsets=tuple(s for s, _ in balanced), residuals=tuple(r for _, r in balanced),
        near_balanced=tuple(s for s, _ in near), near_residuals=tuple(r for _, r in near),
        tolerance=float(tolerance), exhaustive=True, n_interior=m)


def build_discrete_family(angles: DiscreteAngles, subset: Iterable[int], amplitude: float,
                          tolerance: float = BALANCE_TOL,
                          lambdas: Sequence[float] = DISCRETE_LAMBDAS) -> DiscretePhi:
    """φ_j = c on the balanced subset, 0 elsewhere; f_j are the first differences."""
    subset = tuple(sorted(set(int(j) for j in subset)))
    interior = set(angles.indices.tolist())
    if not subset or len(subset) == len(interior):
        raise UnbalancedSubset("subset must be a nonempty proper subset of the interior vertices")
    outside = [j for j in subset if j not in interior]
    if outside:
        raise ValidationError(f"indices {outside} are not interior vertices 2..{angles.n_interior + 1}")
    positions = np.array(subset) - 2
    residual = abs(np.sum(angles.directions()[positions]))
    if residual > tolerance:
        raise UnbalancedSubset(f"subset {list(subset)} sums to {residual:.3e}, above {tolerance:.1e}")

    base = discrete_closure_defect(polyline_from_curvature(angles.curvature))
    if base > 1e-12:
        raise PolylineNotClosed(f"base polyline is open (defect {base:.3e})")

    values = np.zeros(angles.n_interior)
    values[positions] = amplitude
    phi = DiscretePhi.from_phi(values)

    bound = base + 2.0 * residual + 1e-12
    report = discrete_family_scan(angles, phi, lambdas, tolerance=max(bound, 1e-12))
    if not report.passed:
        raise ConstructionError(f"discrete family is not closed (max defect {report.max_defect:.3e})",
                                report.lambda_values, report.defects)
    return phi


def no_balanced_polyline(n: int, even_tail: bool = False) -> Polyline:
    """n copies of the unit-vector pair summing to (1/n, 0), closed by a tail summing to (-1, 0)."""
    if n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")
    if even_tail and n == 1:
        # the tail edges would be opposite to the pair edges
        raise ValidationError("the even tail needs n ≥ 2; with n = 1 the polyline has balanced subsets")
    alpha = math.acos(1.0 / (2 * n))
    pair = [np.exp(1j * alpha), np.exp(-1j * alpha)]
    tail = [np.exp(2j * math.pi / 3), np.exp(-2j * math.pi / 3)] if even_tail else [-1.0 + 0j]
    edges = np.array(pair * n + tail) * np.exp(-1j * alpha)
    points = np.concatenate([[0j], np.cumsum(edges)])
    return Polyline(np.column_stack([points.real, points.imag]))


@dataclass(frozen=True)
class DiscreteConditionReport:
    moment_max: float
    level_max: float
    closure_moment: float
    closure_level: float
    tolerance: float

    @property
    def moments_pass(self) -> bool:
        return self.moment_max <= self.tolerance

    @property
    def levels_pass(self) -> bool:
        return self.level_max <= self.tolerance

    @property
    def closure_consistent(self) -> bool:
        return self.closure_moment <= self.tolerance and self.closure_level <= self.tolerance


def attained_levels(phi: DiscretePhi, match_tol: float = LEVEL_MATCH_TOL) -> List[float]:
    levels: List[float] = []
    for value in np.sort(phi.phi):
        if not levels or value - levels[-1] > match_tol:
            levels.append(float(value))
    return levels


def discrete_conditions(angles: DiscreteAngles, phi: DiscretePhi, tolerance: float = CONDITION_TOL,
                        match_tol: float = LEVEL_MATCH_TOL) -> DiscreteConditionReport:
    """Moments n = 1..2(N-2) and level sums at attained a ≠ 0, plus the forms 1 + Σ e^{iθ_j} and 1 + Σ_{φ=0} e^{iθ_j}."""
    _check_matching(angles, phi)
    n_max = 2 * angles.n_interior
    moment_max = max(abs(discrete_moment(angles, phi, n)) for n in range(1, n_max + 1))
    nonzero = [a for a in attained_levels(phi, match_tol) if abs(a) > match_tol]
    level_max = max((abs(discrete_level_sum(angles, phi, a, match_tol)) for a in nonzero), default=0.0)
    return DiscreteConditionReport(
        moment_max=float(moment_max), level_max=float(level_max),
        closure_moment=abs(1.0 + discrete_moment(angles, phi, 0)),
        closure_level=abs(1.0 + discrete_level_sum(angles, phi, 0.0, match_tol)),
        tolerance=float(tolerance))


def save_polyline(polyline: Polyline, path: str) -> None:
    np.savetxt(path, polyline.vertices, fmt="%.17g")


def load_polyline(path: str) -> Polyline:
    try:
        data = np.loadtxt(path, ndmin=2)
    except ValueError as e:
        raise PairFormatError(f"bad polyline file {path}: {e}")
    if data.shape[1] != 2:
        raise PairFormatError(f"polyline file needs two columns 'x y', got {data.shape[1]}")
    return Polyline(data)


def save_vector(values: Sequence[float], path: str) -> None:
    np.savetxt(path, np.asarray(values, dtype=float), fmt="%.17g")


def load_discrete_input(path: str) -> Tuple[Polyline, DiscreteAngles]:
    """A two-column vertex file or a one-column curvature file."""
    try:
        data = np.loadtxt(path, ndmin=2)
    except ValueError as e:
        raise PairFormatError(f"bad discrete input {path}: {e}")
    if data.shape[1] == 2:
        polyline = Polyline(data)
        return polyline, discrete_angles_from_polyline(polyline)
    if data.shape[1] == 1:
        angles = DiscreteAngles.from_curvature(data.ravel())
        return polyline_from_curvature(angles.curvature), angles
    raise PairFormatError(f"discrete input needs one or two columns, got {data.shape[1]}")


def deformed_polyline(angles: DiscreteAngles, phi: Optional[DiscretePhi], lam: float) -> Polyline:
    if phi is None:
        return polyline_from_curvature(angles.curvature)
    return polyline_from_curvature(angles.curvature + lam * phi.f)
