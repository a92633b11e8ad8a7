"""Explicit pairs (k, f) whose curves stay closed along the whole line k + λf.

Recipe: take a trigonometric curve whose harmonics vanish at every multiple of a
gap modulus M, reparametrize it by arc length (scaled to length 2π), and pair its
turning angle θ(s) with φ(s) = g(cos(l·t(s))) for l a multiple of M.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import make_interp_spline
from scipy.optimize import brentq

from exceptions import ConstructionError, DomainError, PairFormatError, ValidationError
from fungrid import TWO_PI, SampledFunction, UniformGrid, cumulative, derivative, integrate, quadrature
from smoothcurve import DEFAULT_LAMBDAS, family_scan, turning_angle

logger = logging.getLogger(__name__)

REGULARITY_FLOOR = 1e-3
RANDOM_SPEED_FLOOR = 0.25
REGULARITY_SAMPLES = 8192
MAX_ATTEMPTS = 500
INVERSE_TOL = 1e-14
GENERATOR_MARGIN = 1e-2


@dataclass(frozen=True, eq=False)
class GappedTrigCurve:
    """γ(t) = (Σ a_j cos jt + b_j sin jt, Σ ā_j cos jt + b̄_j sin jt), j = 0..D,
    with every harmonic at a positive multiple of M removed"""

    degree: int
    gap_modulus: int
    a: np.ndarray
    b: np.ndarray
    a_bar: np.ndarray
    b_bar: np.ndarray

    def __post_init__(self):
        if self.degree < 1:
            raise ValidationError(f"degree must be at least 1, got {self.degree}")
        if self.gap_modulus < 2:
            raise ValidationError(f"gap modulus must be at least 2, got {self.gap_modulus}")
        for name in ("a", "b", "a_bar", "b_bar"):
            coeffs = np.array(getattr(self, name), dtype=float)
            if coeffs.shape != (self.degree + 1,):
                raise ValidationError(f"{name} needs {self.degree + 1} coefficients, got shape {coeffs.shape}")
            gapped = coeffs[self.gap_indices()]
            if np.any(gapped != 0.0):
                raise ValidationError(f"{name} has nonzero coefficients at multiples of M={self.gap_modulus}")
            coeffs.setflags(write=False)
            object.__setattr__(self, name, coeffs)

    def gap_indices(self) -> np.ndarray:
        return np.arange(self.gap_modulus, self.degree + 1, self.gap_modulus)

    @property
    def harmonics(self) -> np.ndarray:
        return np.arange(self.degree + 1)

    def coefficient_table(self) -> np.ndarray:
        return np.column_stack([self.harmonics, self.a, self.b, self.a_bar, self.b_bar])

    def _combine(self, t: np.ndarray, order: int) -> np.ndarray:
        j = self.harmonics.astype(float)
        phase = np.outer(np.atleast_1d(t), j)
        # d^order/dt^order of cos(jt), sin(jt) expressed through a phase shift
        shifted = phase + order * math.pi / 2
        scale = j ** order
        cos_part, sin_part = np.cos(shifted) * scale, np.sin(shifted) * scale
        x = cos_part @ self.a + sin_part @ self.b
        y = cos_part @ self.a_bar + sin_part @ self.b_bar
        return np.column_stack([x, y])

    def evaluate(self, t) -> np.ndarray:
        return self._combine(t, 0)

    def derivative(self, t) -> np.ndarray:
        return self._combine(t, 1)

    def second_derivative(self, t) -> np.ndarray:
        return self._combine(t, 2)

    def speed(self, t) -> np.ndarray:
        return np.hypot(*self.derivative(t).T)

    def regularity_ratio(self, samples: int = REGULARITY_SAMPLES) -> float:
        """min |γ′| / mean |γ′| over a fine grid."""
        speed = self.speed(np.linspace(0.0, TWO_PI, samples, endpoint=False))
        mean = speed.mean()
        return float(speed.min() / mean) if mean > 0 else 0.0

    def gap_orthogonality(self, n_max: int = 8, grid: Optional[UniformGrid] = None) -> Tuple[float, float]:
        """Largest |∫ γ′(t) cos(nMt) dt| for n = 1..n_max, exactly from coefficients and by quadrature."""
        exact = 0.0
        for n in range(1, n_max + 1):
            j = n * self.gap_modulus
            if j <= self.degree:
                # γ′ has cos(jt) coefficient j·b_j (x) and j·b̄_j (y)
                exact = max(exact, math.pi * j * abs(self.b[j]), math.pi * j * abs(self.b_bar[j]))
        grid = grid or UniformGrid(4096)
        velocity = self.derivative(grid.nodes)
        numeric = 0.0
        for n in range(1, n_max + 1):
            weight = np.cos(n * self.gap_modulus * grid.nodes)
            for component in velocity.T:
                numeric = max(numeric, abs(quadrature(grid, component * weight, periodic=True)))
        return exact, numeric


def make_gapped_curve(degree: int, gap_modulus: int, seed: Optional[int] = None,
                      coefficients: Optional[np.ndarray] = None,
                      regularity_floor: float = REGULARITY_FLOOR,
                      sample_floor: float = RANDOM_SPEED_FLOOR) -> GappedTrigCurve:
    """Explicit coefficients (rows j, columns a, b, ā, b̄) are validated; otherwise sample at random."""
    if coefficients is not None:
        table = np.asarray(coefficients, dtype=float)
        if table.shape != (degree + 1, 4):
            raise ValidationError(f"coefficient table must have shape ({degree + 1}, 4), got {table.shape}")
        curve = GappedTrigCurve(degree, gap_modulus, *table.T)
        ratio = curve.regularity_ratio()
        if ratio <= regularity_floor:
            raise ValidationError(f"curve is not regular: min speed is {ratio:.2e} of the mean")
        return curve

    if gap_modulus < 2:
        raise ValidationError(f"gap modulus must be at least 2, got {gap_modulus}")
    rng = np.random.default_rng(seed)
    envelope = np.zeros(degree + 1)
    envelope[1:] = np.arange(1, degree + 1, dtype=float) ** -2
    envelope[gap_modulus::gap_modulus] = 0.0
    for attempt in range(1, MAX_ATTEMPTS + 1):
        table = rng.standard_normal((degree + 1, 4)) * envelope[:, None]
        curve = GappedTrigCurve(degree, gap_modulus, *table.T)
        ratio = curve.regularity_ratio()
        if ratio > max(regularity_floor, sample_floor):
            logger.debug("accepted random curve after %d attempt(s), speed ratio %.3f", attempt, ratio)
            return curve
        logger.debug("rejected random curve (speed ratio %.3g)", ratio)
    raise ConstructionError(f"no regular curve found in {MAX_ATTEMPTS} attempts")


def circle_curve(radius: float = 1.0, gap_modulus: int = 2) -> GappedTrigCurve:
    return ellipse_curve(radius, radius, gap_modulus)


def ellipse_curve(semi_major: float = 1.0, semi_minor: float = 0.5, gap_modulus: int = 2) -> GappedTrigCurve:
    table = np.zeros((2, 4))
    table[1, 0] = semi_major
    table[1, 3] = semi_minor
    return make_gapped_curve(1, gap_modulus, coefficients=table)


@dataclass(frozen=True, eq=False)
class ArcLengthMap:
    """s(t) = (2π/L)∫₀^t |γ′| and its inverse t(s), both sampled on the same grid"""

    total_length: float
    forward: SampledFunction
    inverse: SampledFunction

    def round_trip_error(self, samples: int = 1001) -> float:
        x = np.linspace(0.0, TWO_PI, samples)
        s = np.clip(self.forward(x), 0.0, TWO_PI)
        return float(np.abs(self.inverse(s) - x).max())


def arclength_map(curve: GappedTrigCurve, n_samples: int = 4096,
                  regularity_floor: float = REGULARITY_FLOOR) -> ArcLengthMap:
    ratio = curve.regularity_ratio()
    if ratio <= regularity_floor:
        raise ConstructionError(f"curve is not regular enough for arc-length reparametrization (ratio {ratio:.2e})")
    grid = UniformGrid(n_samples)
    speed = SampledFunction.from_callable(curve.speed, grid, periodic=True)
    length = integrate(speed)
    s_values = np.array(cumulative(speed).values) * (TWO_PI / length)
    s_values[0], s_values[-1] = 0.0, TWO_PI
    if np.any(np.diff(s_values) <= 0.0):
        raise ConstructionError("arc-length function is not strictly increasing")
    forward = SampledFunction.detect(grid, s_values)

    s_of_t = forward.spline
    nodes = grid.nodes
    t_values = np.empty_like(nodes)
    t_values[0], t_values[-1] = 0.0, TWO_PI
    cells = np.searchsorted(s_values, nodes[1:-1])
    for j, (target, cell) in enumerate(zip(nodes[1:-1], cells), start=1):
        lo, hi = nodes[cell - 1], nodes[cell]
        t_values[j] = brentq(lambda t: float(s_of_t(t)) - target, lo, hi, xtol=INVERSE_TOL, rtol=4 * np.finfo(float).eps)
    inverse = SampledFunction.detect(grid, t_values)
    return ArcLengthMap(total_length=float(length), forward=forward, inverse=inverse)


@dataclass(frozen=True, eq=False)
class Generator:
    """Scalar function g used to pass from φ to g(φ)"""

    kind: str
    name: str
    coefficients: Tuple[float, ...] = ()
    table_x: Tuple[float, ...] = ()
    table_y: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("polynomial", "exp_affine", "table"):
            raise ValidationError(f"unknown generator kind {self.kind!r}")
        if self.kind == "exp_affine" and len(self.coefficients) != 4:
            raise ValidationError("exp-affine generator needs (α, β, γ, δ)")
        if self.kind == "table":
            if len(self.table_x) < 4 or len(self.table_x) != len(self.table_y):
                raise ValidationError("table generator needs at least 4 matching (x, y) pairs")
            if np.any(np.diff(self.table_x) <= 0):
                raise ValidationError("table abscissas must be strictly increasing")
            if self.table_x[0] > -1.0 - GENERATOR_MARGIN or self.table_x[-1] < 1.0 + GENERATOR_MARGIN:
                raise ValidationError(f"table must cover [-1-{GENERATOR_MARGIN:g}, 1+{GENERATOR_MARGIN:g}]")
        points = np.linspace(-1.0 - GENERATOR_MARGIN, 1.0 + GENERATOR_MARGIN, 257)
        if not np.all(np.isfinite(self(points))):
            raise ValidationError(f"generator {self.name} is not bounded on [-1, 1]")

    @classmethod
    def identity(cls) -> "Generator":
        return cls.polynomial((0.0, 1.0), name="identity")

    @classmethod
    def polynomial(cls, coefficients: Sequence[float], name: str = "") -> "Generator":
        coefficients = tuple(float(c) for c in coefficients) or (0.0,)
        return cls("polynomial", name or "poly:" + ",".join(f"{c:g}" for c in coefficients), coefficients)

    @classmethod
    def exp_affine(cls, alpha: float = 1.0, beta: float = 1.0, gamma: float = 0.0, delta: float = 0.0,
                   name: str = "") -> "Generator":
        """g(x) = α·e^{βx} + γx + δ."""
        return cls("exp_affine", name or f"exp-affine:{alpha:g},{beta:g},{gamma:g},{delta:g}",
                   (float(alpha), float(beta), float(gamma), float(delta)))

    @classmethod
    def table(cls, xs: Sequence[float], ys: Sequence[float], name: str = "table") -> "Generator":
        return cls("table", name, table_x=tuple(float(x) for x in xs), table_y=tuple(float(y) for y in ys))

    @classmethod
    def parse(cls, spec: str) -> "Generator":
        """identity | square | cube | exp | exp+2x | poly:c0,c1,... | table:PATH"""
        spec = spec.strip()
        named = {
            "identity": lambda: cls.identity(),
            "square": lambda: cls.polynomial((0.0, 0.0, 1.0), name="square"),
            "cube": lambda: cls.polynomial((0.0, 0.0, 0.0, 1.0), name="cube"),
            "exp": lambda: cls.exp_affine(1.0, 1.0, 0.0, 0.0, name="exp"),
            "exp+2x": lambda: cls.exp_affine(1.0, 1.0, 2.0, 0.0, name="exp+2x"),
        }
        if spec in named:
            return named[spec]()
        if spec.startswith("poly:"):
            try:
                return cls.polynomial([float(c) for c in spec[5:].split(",")], name=spec)
            except ValueError:
                raise ValidationError(f"bad polynomial coefficients in {spec!r}")
        if spec.startswith("table:"):
            path = spec[6:]
            try:
                data = np.loadtxt(path, ndmin=2)
            except (OSError, ValueError) as e:
                raise ValidationError(f"cannot read generator table {path}: {e}")
            return cls.table(data[:, 0], data[:, 1], name=spec)
        raise ValidationError(f"unknown generator {spec!r}")

    @property
    def domain(self) -> Tuple[float, float]:
        if self.kind == "table":
            return self.table_x[0], self.table_x[-1]
        return -math.inf, math.inf

    def _spline(self):
        return make_interp_spline(np.array(self.table_x), np.array(self.table_y), k=3)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "polynomial":
            return Polynomial(self.coefficients)(x)
        if self.kind == "exp_affine":
            alpha, beta, gamma, delta = self.coefficients
            return alpha * np.exp(beta * x) + gamma * x + delta
        lo, hi = self.domain
        if np.any(x < lo) or np.any(x > hi):
            raise DomainError(f"table generator evaluated outside [{lo:g}, {hi:g}]")
        return self._spline()(x)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "polynomial":
            return Polynomial(self.coefficients).deriv()(x)
        if self.kind == "exp_affine":
            alpha, beta, gamma, _ = self.coefficients
            return alpha * beta * np.exp(beta * x) + gamma
        lo, hi = self.domain
        if np.any(x < lo) or np.any(x > hi):
            raise DomainError(f"table generator evaluated outside [{lo:g}, {hi:g}]")
        return self._spline().derivative()(x)


@dataclass(frozen=True, eq=False)
class FamilyPair:
    """Curvature k and deformation direction f, both in arc length on [0, 2π]"""

    k: SampledFunction
    f: SampledFunction
    provenance: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.k.grid != self.f.grid:
            raise ValidationError("k and f must share one grid")

    @property
    def grid(self) -> UniformGrid:
        return self.k.grid

    def save(self, path: str) -> None:
        lines = ["# affine curvature family pair", f"grid={self.grid.n_samples}"]
        for key, value in sorted(self.provenance.items()):
            lines.append(f"provenance.{key}={value}")
        lines.append("k=" + ",".join(f"{v:.17g}" for v in self.k.values))
        lines.append("f=" + ",".join(f"{v:.17g}" for v in self.f.values))
        with open(path, "w") as handle:
            handle.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str) -> "FamilyPair":
        entries: Dict[str, Tuple[int, str]] = {}
        with open(path) as handle:
            for line_number, raw in enumerate(handle, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise PairFormatError(f"expected key=value, got {line[:40]!r}", line_number)
                key, value = line.split("=", 1)
                entries[key.strip()] = (line_number, value.strip())

        for required in ("grid", "k", "f"):
            if required not in entries:
                raise PairFormatError(f"missing required key {required!r}")
        grid_line, grid_text = entries["grid"]
        try:
            grid = UniformGrid(int(grid_text))
        except ValueError as e:
            raise PairFormatError(f"bad grid size: {e}", grid_line)

        samples = {}
        for name in ("k", "f"):
            line_number, text = entries[name]
            try:
                values = np.array([float(v) for v in text.split(",")])
            except ValueError as e:
                raise PairFormatError(f"bad sample in {name}: {e}", line_number)
            if values.size != grid.n_samples:
                raise PairFormatError(f"{name} has {values.size} samples, grid says {grid.n_samples}", line_number)
            try:
                samples[name] = SampledFunction.detect(grid, values)
            except ValueError as e:
                raise PairFormatError(str(e), line_number)
        provenance = {key[len("provenance."):]: value for key, (_, value) in entries.items()
                      if key.startswith("provenance.")}
        return cls(samples["k"], samples["f"], provenance)


def source_turning_angle(curve: GappedTrigCurve, grid: UniformGrid) -> SampledFunction:
    """Continuous turning angle of γ in its own parameter, rotated so that θ(0) = 0."""
    velocity = curve.derivative(grid.nodes)
    acceleration = curve.second_derivative(grid.nodes)
    cross = velocity[:, 0] * acceleration[:, 1] - velocity[:, 1] * acceleration[:, 0]
    rate = cross / np.sum(velocity ** 2, axis=1)
    return cumulative(SampledFunction(grid, rate, periodic_hint=True))


def turning_in_arclength(curve: GappedTrigCurve, arc_map: ArcLengthMap) -> SampledFunction:
    """θ(t(s)) sampled on the s-grid."""
    theta_t = source_turning_angle(curve, arc_map.inverse.grid)
    return SampledFunction.detect(arc_map.inverse.grid, theta_t(arc_map.inverse.values))


def bridge_integrals(curve: GappedTrigCurve, arc_map: ArcLengthMap, n_max: int = 8) -> List[float]:
    """|∫ e^{iθ(t(s))} e^{inMt(s)} ds| for n = 1..n_max."""
    theta = turning_in_arclength(curve, arc_map)
    t_of_s = arc_map.inverse.values
    grid = theta.grid
    return [abs(quadrature(grid, np.exp(1j * (theta.values + n * curve.gap_modulus * t_of_s))))
            for n in range(1, n_max + 1)]


def _verify(pair: FamilyPair, lambdas: Sequence[float], tolerance: float) -> FamilyPair:
    report = family_scan(pair.k, pair.f, lambdas, tolerance)
    if not report.passed:
        raise ConstructionError(
            f"constructed family is not closed to {tolerance:.1e} (max defect {report.max_defect:.3e}); "
            "increase the grid size",
            report.lambda_values, report.defects)
    provenance = dict(pair.provenance)
    provenance["max_defect"] = f"{report.max_defect:.3e}"
    return FamilyPair(pair.k, pair.f, provenance)


def build_pair(curve: GappedTrigCurve, arc_map: ArcLengthMap, l: Optional[int] = None,
               g: Optional[Generator] = None, tolerance: float = 1e-7,
               lambdas: Sequence[float] = DEFAULT_LAMBDAS,
               provenance: Optional[Dict[str, str]] = None) -> FamilyPair:
    """(k, f) from a gapped curve: k is its curvature in arc length, f = d/ds g(cos(l·t(s)))."""
    l = curve.gap_modulus if l is None else int(l)
    if l <= 0 or l % curve.gap_modulus:
        raise ValidationError(f"harmonic l={l} must be a positive multiple of M={curve.gap_modulus}")
    g = g or Generator.identity()

    theta = turning_in_arclength(curve, arc_map)
    t_of_s = arc_map.inverse.values
    phi = SampledFunction.detect(theta.grid, g(np.cos(l * t_of_s)))
    k, f = derivative(theta), derivative(phi)

    details = {"source": "gapped", "degree": str(curve.degree), "gap_modulus": str(curve.gap_modulus),
               "harmonic": str(l), "generator": g.name, "length": f"{arc_map.total_length:.17g}"}
    details.update(provenance or {})
    return _verify(FamilyPair(k, f, details), lambdas, tolerance)


def compose_pair(pair: FamilyPair, g: Generator, tolerance: float = 1e-7,
                 lambdas: Sequence[float] = DEFAULT_LAMBDAS) -> FamilyPair:
    """(k, f) → (k, f·g′(φ)) with φ = ∫f."""
    phi = turning_angle(pair.f)
    lo, hi = g.domain
    if phi.values.min() < lo or phi.values.max() > hi:
        raise DomainError(f"generator {g.name} is not defined on the range of φ")
    f_new = pair.f.with_values(pair.f.values * g.derivative(phi.values))
    provenance = dict(pair.provenance)
    provenance["composed"] = (provenance.get("composed", "") + "," + g.name).lstrip(",")
    return _verify(FamilyPair(pair.k, f_new, provenance), lambdas, tolerance)


def save_coefficients(curve: GappedTrigCurve, path: str) -> None:
    """Write the gapped-curve coefficient table."""
    header = f"gap_modulus={curve.gap_modulus}\nj a b abar bbar"
    np.savetxt(path, curve.coefficient_table(), fmt=["%d", "%.17g", "%.17g", "%.17g", "%.17g"], header=header)


def load_coefficients(path: str) -> GappedTrigCurve:
    """Read a coefficient table written by save_coefficients."""
    gap_modulus = None
    with open(path) as handle:
        for line_number, raw in enumerate(handle, start=1):
            line = raw.strip()
            if line.startswith("#") and "gap_modulus=" in line:
                try:
                    gap_modulus = int(line.split("gap_modulus=", 1)[1])
                except ValueError:
                    raise PairFormatError("bad gap_modulus", line_number)
    if gap_modulus is None:
        raise PairFormatError("coefficient table lacks a '# gap_modulus=M' header")
    try:
        table = np.loadtxt(path, ndmin=2)
    except ValueError as e:
        raise PairFormatError(f"bad coefficient table: {e}")
    if table.shape[1] != 5 or np.any(table[:, 0] != np.arange(table.shape[0])):
        raise PairFormatError("coefficient table needs rows j = 0..D with columns j a b abar bbar")
    return make_gapped_curve(table.shape[0] - 1, gap_modulus, coefficients=table[:, 1:])
