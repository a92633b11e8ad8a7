"""Calculus on real functions sampled on a uniform closed grid over [0, 2π].

Periodic functions (and functions that are periodic up to a linear drift, such
as the turning angle of a closed curve) take spectral paths; everything else
goes through a piecewise quintic interpolant.
"""
import csv
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from numpy.polynomial import legendre
from scipy import fft
from scipy.interpolate import PPoly, make_interp_spline
from scipy.optimize import brentq

from exceptions import CriticalValue, DomainError, PairFormatError, ValidationError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
MIN_SAMPLES = 16
SPLINE_DEGREE = 5
GAUSS_ORDER = 8
PERIODICITY_TOL = 1e-9
SPECTRAL_TAIL_RTOL = 1e-11
CRITICAL_BAND = 1e-6
ROOT_TOL = 1e-12
ROOT_MERGE = 1e-10

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class UniformGrid:
    """Closed uniform grid t_j = 2πj/(n-1) on [0, 2π]"""

    n_samples: int

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < MIN_SAMPLES:
            raise ValidationError(f"grid needs at least {MIN_SAMPLES} samples, got {self.n_samples}")
        if self.n_samples & (self.n_samples - 1):
            logger.debug("grid size %d is not a power of two", self.n_samples)

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = np.linspace(0.0, TWO_PI, self.n_samples)
        nodes[0], nodes[-1] = 0.0, TWO_PI
        nodes.setflags(write=False)
        return nodes

    @property
    def spacing(self) -> float:
        return TWO_PI / (self.n_samples - 1)

    def sample(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        return np.broadcast_to(np.asarray(fn(self.nodes), dtype=float), (self.n_samples,)).copy()


def spectral_tail(values: np.ndarray) -> float:
    """Largest coefficient in the upper quarter of the spectrum, relative to the largest overall."""
    unique = np.asarray(values)[:-1]
    coeffs = np.abs(fft.fft(unique))
    peak = coeffs.max(initial=0.0)
    if peak == 0.0:
        return 0.0
    wavenumbers = np.abs(fft.fftfreq(unique.size, d=1.0 / unique.size))
    tail = coeffs[wavenumbers >= 0.375 * unique.size]
    return float(tail.max(initial=0.0) / peak)


def is_periodic(values: np.ndarray) -> bool:
    """True when the samples join smoothly across 0 ↔ 2π and are spectrally resolved."""
    values = np.asarray(values)
    scale = max(1.0, float(np.abs(values).max(initial=0.0)))
    if abs(values[0] - values[-1]) > PERIODICITY_TOL * scale:
        return False
    return spectral_tail(values) <= SPECTRAL_TAIL_RTOL


def _drift_split(values: np.ndarray, nodes: np.ndarray) -> Optional[Tuple[float, np.ndarray]]:
    slope = (values[-1] - values[0]) / TWO_PI
    residual = values - slope * nodes
    if is_periodic(residual):
        return slope, residual
    return None


def _interpolant(nodes: np.ndarray, values: np.ndarray):
    return make_interp_spline(nodes, values, k=SPLINE_DEGREE)


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """A real function on [0, 2π] given by its values at the grid nodes"""

    grid: UniformGrid
    values: np.ndarray
    periodic_hint: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n_samples,):
            raise ValidationError(f"expected {self.grid.n_samples} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("sampled values must be finite at every node")
        if self.periodic_hint:
            scale = max(1.0, float(np.abs(values).max()))
            if abs(values[0] - values[-1]) > PERIODICITY_TOL * scale:
                raise ValidationError("periodic_hint set but endpoint values differ")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def detect(cls, grid: UniformGrid, values: np.ndarray) -> "SampledFunction":
        """Build from samples, flagging periodicity when the samples support it."""
        values = np.asarray(values, dtype=float)
        return cls(grid, values, periodic_hint=is_periodic(values))

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], grid: UniformGrid,
                      periodic: Optional[bool] = None) -> "SampledFunction":
        values = grid.sample(fn)
        if periodic is None:
            return cls.detect(grid, values)
        return cls(grid, values, periodic_hint=periodic)

    @classmethod
    def constant(cls, grid: UniformGrid, value: float) -> "SampledFunction":
        return cls(grid, np.full(grid.n_samples, float(value)), periodic_hint=True)

    @cached_property
    def spline(self):
        return _interpolant(self.grid.nodes, self.values)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def __call__(self, t: ArrayLike) -> ArrayLike:
        return evaluate(self, t)

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "SampledFunction":
        """Pointwise composition fn∘self."""
        return SampledFunction.detect(self.grid, fn(self.values))

    def with_values(self, values: np.ndarray) -> "SampledFunction":
        return SampledFunction.detect(self.grid, values)


def evaluate(fun: SampledFunction, t: ArrayLike) -> ArrayLike:
    """Value of the piecewise quintic interpolant at t ∈ [0, 2π]."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > TWO_PI) or not np.all(np.isfinite(t_arr)):
        raise DomainError(f"evaluation point outside [0, 2π]: {t}")
    result = fun.spline(t_arr)
    # grid nodes return the stored sample
    index = np.rint(t_arr / fun.grid.spacing).astype(int)
    on_node = fun.nodes[index] == t_arr
    result = np.where(on_node, fun.values[index], result)
    if np.ndim(t) == 0:
        return float(result)
    return result


def _gauss_panels(nodes: np.ndarray, values: np.ndarray) -> complex:
    abscissas, weights = legendre.leggauss(GAUSS_ORDER)
    left = nodes[:-1]
    widths = np.diff(nodes)
    points = left[:, None] + 0.5 * (abscissas[None, :] + 1.0) * widths[:, None]
    if np.iscomplexobj(values):
        stacked = np.column_stack([values.real, values.imag])
        panel = _interpolant(nodes, stacked)(points.ravel()).reshape(points.shape + (2,))
        samples = panel[..., 0] + 1j * panel[..., 1]
    else:
        samples = _interpolant(nodes, values)(points.ravel()).reshape(points.shape)
    return np.sum(0.5 * widths * (samples @ weights))


def quadrature(grid: UniformGrid, values: np.ndarray, periodic: Optional[bool] = None):
    """∫₀^{2π} of the nodal values (real or complex).

    Periodic integrands use the trapezoid rule, which is spectrally accurate;
    the rest use Gauss–Legendre panels on the quintic interpolant.
    """
    values = np.asarray(values)
    if periodic is None:
        periodic = is_periodic(values.real) and is_periodic(values.imag) if np.iscomplexobj(values) \
            else is_periodic(values)
    if periodic:
        h = grid.spacing
        total = h * (np.sum(values) - 0.5 * (values[0] + values[-1]))
    else:
        total = _gauss_panels(grid.nodes, values)
    if np.iscomplexobj(values):
        return complex(total)
    return float(np.real(total))


def integrate(fun: SampledFunction) -> float:
    """∫₀^{2π} fun, trapezoid when periodic, Gauss panels otherwise."""
    return quadrature(fun.grid, fun.values, periodic=fun.periodic_hint or None)


def half_resolution(fun: SampledFunction) -> Optional[SampledFunction]:
    """fun on the grid with half as many intervals, or None below the minimum grid size."""
    intervals = fun.grid.n_samples - 1
    if intervals // 2 + 1 < MIN_SAMPLES:
        return None
    coarse = UniformGrid(intervals // 2 + 1)
    if intervals % 2 == 0:
        values = fun.values[::2]
    else:
        values = evaluate(fun, coarse.nodes)
    return SampledFunction(coarse, values, periodic_hint=fun.periodic_hint)


def quadrature_error(fun: SampledFunction) -> float:
    """Error estimate for integrate(fun): the change against the half-resolution grid.

    Grids too small to halve compare against the cubic interpolant on the same samples.
    """
    values = fun.values
    floor = 8.0 * np.finfo(float).eps * fun.grid.spacing * float(np.abs(values).sum()) + 1e-300
    coarse = half_resolution(fun)
    if coarse is not None:
        return max(floor, abs(integrate(fun) - integrate(coarse)))
    cubic = make_interp_spline(fun.nodes, values, k=3)
    return max(floor, abs(integrate(fun) - float(cubic.integrate(0.0, TWO_PI))))


def _spectral_derivative(values: np.ndarray) -> np.ndarray:
    unique = values[:-1]
    coeffs = fft.rfft(unique)
    wavenumbers = np.arange(coeffs.size)
    derived = 1j * wavenumbers * coeffs
    if unique.size % 2 == 0:
        derived[-1] = 0.0
    out = fft.irfft(derived, n=unique.size)
    return np.append(out, out[0])


def _spectral_antiderivative(values: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    unique = values[:-1]
    coeffs = fft.rfft(unique)
    mean = coeffs[0].real / unique.size
    wavenumbers = np.arange(coeffs.size)
    integrated = np.zeros_like(coeffs)
    integrated[1:] = coeffs[1:] / (1j * wavenumbers[1:])
    if unique.size % 2 == 0:
        integrated[-1] = 0.0
    periodic = fft.irfft(integrated, n=unique.size)
    periodic = np.append(periodic, periodic[0])
    return mean * nodes + periodic - periodic[0]


def cumulative(fun: SampledFunction) -> SampledFunction:
    """F(t) = ∫₀^t fun, with F(0) = 0."""
    if fun.periodic_hint:
        values = _spectral_antiderivative(fun.values, fun.nodes)
    else:
        antiderivative = fun.spline.antiderivative()
        values = antiderivative(fun.nodes) - antiderivative(0.0)
    values[0] = 0.0
    return SampledFunction.detect(fun.grid, values)


def derivative(fun: SampledFunction) -> SampledFunction:
    """Spectral derivative for (drifting) periodic input, spline derivative otherwise."""
    split = (0.0, fun.values) if fun.periodic_hint else _drift_split(fun.values, fun.nodes)
    if split is not None:
        slope, residual = split
        values = _spectral_derivative(residual) + slope
    else:
        values = fun.spline.derivative()(fun.nodes)
    return SampledFunction.detect(fun.grid, values)


@dataclass(frozen=True)
class LevelCrossings:
    """Solutions of fun(t) = level in (0, 2π) with the local derivative at each"""

    level: float
    roots: Tuple[Tuple[float, float], ...]
    touches_boundary: bool

    def __iter__(self):
        return iter(self.roots)

    def __len__(self) -> int:
        return len(self.roots)

    @property
    def locations(self) -> List[float]:
        return [t for t, _ in self.roots]


def find_level_crossings(fun: SampledFunction, a: float) -> LevelCrossings:
    """Every t with fun(t) = a, with fun′ at each root; raises CriticalValue near a critical level."""
    spline = fun.spline
    slope = spline.derivative()
    sup_slope = float(np.abs(slope(fun.nodes)).max())

    scale = max(1.0, fun.sup_norm())
    touches = abs(fun.values[0] - a) <= PERIODICITY_TOL * scale or abs(fun.values[-1] - a) <= PERIODICITY_TOL * scale
    if touches:
        logger.debug("level %.6g equals a boundary value", a)

    candidates = PPoly.from_spline(spline).solve(a, discontinuity=False, extrapolate=False)
    if np.any(np.isnan(candidates)):
        raise CriticalValue(f"function is constant at level {a:.6g} on a whole cell", level=a)
    candidates = np.sort(candidates[(candidates > 0.0) & (candidates < TWO_PI)])

    half_cell = 0.5 * fun.grid.spacing
    polished: List[float] = []
    for root in candidates:
        lo, hi = max(root - half_cell, 0.0), min(root + half_cell, TWO_PI)
        f_lo, f_hi = float(spline(lo)) - a, float(spline(hi)) - a
        if f_lo * f_hi < 0.0:
            root = brentq(lambda x: float(spline(x)) - a, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        if polished and root - polished[-1] <= ROOT_MERGE:
            continue
        polished.append(float(root))

    roots = []
    for root in polished:
        d = float(slope(root))
        if sup_slope == 0.0 or abs(d) < CRITICAL_BAND * sup_slope:
            raise CriticalValue(f"level {a:.6g} is near-critical at t={root:.6g}", level=a)
        roots.append((root, d))
    return LevelCrossings(level=float(a), roots=tuple(roots), touches_boundary=bool(touches))


def save_csv(fun: SampledFunction, path: str) -> None:
    """Write t,value rows with 17 significant digits."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "value"])
        for t, v in zip(fun.nodes, fun.values):
            writer.writerow([f"{t:.17g}", f"{v:.17g}"])


def load_csv(path: str) -> SampledFunction:
    """Read a t,value CSV back onto a uniform grid."""
    values = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        for line_number, row in enumerate(reader, start=1):
            if line_number == 1 and row and row[0].strip() == "t":
                continue
            try:
                values.append(float(row[1]))
            except (IndexError, ValueError) as e:
                raise PairFormatError(f"bad sample row {row!r}: {e}", line_number)
    grid = UniformGrid(len(values))
    return SampledFunction.detect(grid, np.array(values))
