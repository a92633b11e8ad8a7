import os
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Mapping, Optional

import numpy as np

from exceptions import ConfigError, ValidationError
from smoothcurve import MAX_MOMENT_ORDER

# Try to load environment variables from .env file
try:
    from dotenv import dotenv_values, load_dotenv
    load_dotenv()
except ImportError:
    dotenv_values = None
    print("⚠️ python-dotenv not installed. Using system environment variables.")

ENV_PREFIX = "CURVEFAMILY_"
COMMANDS = ("construct", "verify", "scan", "discrete", "render")


def _parse_bool(raw: str) -> bool:
    lowered = str(raw).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_optional_int(raw: str) -> Optional[int]:
    return None if str(raw).strip().lower() in ("", "none") else int(raw)


def _parse_float_list(raw: Any) -> List[float]:
    if isinstance(raw, (list, tuple)):
        return [float(x) for x in raw]
    return [float(x) for x in str(raw).replace(",", " ").split()]


def _parse_int_list(raw: Any) -> List[int]:
    if isinstance(raw, (list, tuple)):
        return [int(x) for x in raw]
    return [int(x) for x in str(raw).replace(",", " ").split()]


def _parse_optional_str(raw: Any) -> Optional[str]:
    return None if raw is None or str(raw).strip() == "" else str(raw)


PARSERS = {
    "COMMAND": str, "INPUT_PATH": _parse_optional_str, "OUTPUT_PATH": str, "CURVE_PATH": _parse_optional_str,
    "GRID": int, "LAMBDA_MIN": float, "LAMBDA_MAX": float, "LAMBDA_STEP": float, "LAMBDAS": _parse_float_list,
    "MAX_MOMENT": int, "TOL": float, "MOMENT_TOL": float, "LEVEL_TOL": float, "BOUNDARY_TOL": float,
    "BOUNDARY_ORDER": int, "BALANCE_TOL": float, "SEED": _parse_optional_int, "DEGREE": int,
    "GAP_MODULUS": int, "GENERATOR": str, "HARMONIC": _parse_optional_int, "SUBSET_CAP": int,
    "NO_BALANCED": _parse_optional_int, "EVEN_TAIL": _parse_bool, "FAMILY": _parse_bool,
    "SUBSET": _parse_int_list, "AMPLITUDE": float, "FORCE": _parse_bool, "MONTAGE": _parse_bool,
    "STROKE_WIDTH": float, "COLUMNS": int, "WORKERS": int, "LOG_LEVEL": str,
}


def _env(name: str, default: str):
    def factory():
        raw = os.getenv(ENV_PREFIX + name, default)
        try:
            return PARSERS[name](raw)
        except ValueError as e:
            raise ConfigError(f"{ENV_PREFIX}{name}={raw!r}: {e}")
    return field(default_factory=factory)


@dataclass
class RunConfig:
    """Settings for one run of the curve family tools"""

    # Command and files
    COMMAND: str = "verify"
    INPUT_PATH: Optional[str] = None
    OUTPUT_PATH: str = _env("OUTPUT_PATH", "out")
    CURVE_PATH: Optional[str] = None

    # Numerics
    GRID: int = _env("GRID", "4096")
    LAMBDA_MIN: float = _env("LAMBDA_MIN", "-5")
    LAMBDA_MAX: float = _env("LAMBDA_MAX", "5")
    LAMBDA_STEP: float = _env("LAMBDA_STEP", "0.5")
    LAMBDAS: List[float] = _env("LAMBDAS", "")
    MAX_MOMENT: int = _env("MAX_MOMENT", "12")
    TOL: float = _env("TOL", "1e-7")
    MOMENT_TOL: float = _env("MOMENT_TOL", "1e-8")
    LEVEL_TOL: float = _env("LEVEL_TOL", "1e-6")
    BOUNDARY_TOL: float = _env("BOUNDARY_TOL", "1e-6")
    BOUNDARY_ORDER: int = _env("BOUNDARY_ORDER", "3")
    BALANCE_TOL: float = _env("BALANCE_TOL", "1e-9")
    SEED: Optional[int] = _env("SEED", "")
    WORKERS: int = _env("WORKERS", "1")

    # Construction
    DEGREE: int = _env("DEGREE", "3")
    GAP_MODULUS: int = _env("GAP_MODULUS", "4")
    GENERATOR: str = _env("GENERATOR", "identity")
    HARMONIC: Optional[int] = _env("HARMONIC", "")

    # Discrete
    SUBSET_CAP: int = _env("SUBSET_CAP", "22")
    NO_BALANCED: Optional[int] = None
    EVEN_TAIL: bool = False
    FAMILY: bool = False
    SUBSET: List[int] = field(default_factory=list)
    AMPLITUDE: float = _env("AMPLITUDE", "0.5")

    # Rendering
    FORCE: bool = False
    MONTAGE: bool = False
    STROKE_WIDTH: float = _env("STROKE_WIDTH", "1.5")
    COLUMNS: int = _env("COLUMNS", "4")

    LOG_LEVEL: str = _env("LOG_LEVEL", "INFO")

    @classmethod
    def from_sources(cls, overrides: Optional[Mapping[str, Any]] = None,
                     config_file: Optional[str] = None) -> "RunConfig":
        """Flags override the config file, which overrides the environment and the defaults."""
        config = cls()
        if config_file:
            config.update(cls.read_config_file(config_file))
        config.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return config

    @staticmethod
    def read_config_file(path: str) -> Dict[str, str]:
        if dotenv_values is None:
            raise ConfigError("python-dotenv is required to read config files")
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        values = {}
        for key, raw in dotenv_values(path).items():
            name = key.upper()
            if name.startswith(ENV_PREFIX):
                name = name[len(ENV_PREFIX):]
            values[name] = "" if raw is None else raw
        return values

    def update(self, values: Mapping[str, Any]) -> None:
        known = {f.name for f in fields(self)}
        for name, raw in values.items():
            name = name.upper()
            if name not in known:
                raise ConfigError(f"unknown configuration key {name}")
            try:
                value = PARSERS[name](raw) if isinstance(raw, str) else raw
            except ValueError as e:
                raise ConfigError(f"{name}={raw!r}: {e}")
            setattr(self, name, value)

    def lambda_values(self) -> List[float]:
        if self.LAMBDAS:
            return [float(x) for x in self.LAMBDAS]
        count = int(np.floor((self.LAMBDA_MAX - self.LAMBDA_MIN) / self.LAMBDA_STEP + 1e-9)) + 1
        return [round(self.LAMBDA_MIN + i * self.LAMBDA_STEP, 12) for i in range(count)]

    def validate(self):
        """Validate configuration"""
        if self.COMMAND not in COMMANDS:
            raise ConfigError(f"unknown command {self.COMMAND!r}; expected one of {', '.join(COMMANDS)}")
        if self.GRID < 64:
            raise ConfigError(f"grid size must be at least 64, got {self.GRID}")
        if self.LAMBDA_STEP <= 0:
            raise ConfigError(f"λ step must be positive, got {self.LAMBDA_STEP}")
        if self.LAMBDA_MAX < self.LAMBDA_MIN:
            raise ConfigError(f"λ range is empty: [{self.LAMBDA_MIN}, {self.LAMBDA_MAX}]")
        for name in ("TOL", "MOMENT_TOL", "LEVEL_TOL", "BOUNDARY_TOL", "BALANCE_TOL"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 <= self.MAX_MOMENT <= MAX_MOMENT_ORDER:
            raise ConfigError(f"max moment must lie in [0, {MAX_MOMENT_ORDER}], got {self.MAX_MOMENT}")
        if self.BOUNDARY_ORDER < 1:
            raise ConfigError(f"boundary order must be positive, got {self.BOUNDARY_ORDER}")
        if self.DEGREE < 1:
            raise ConfigError(f"degree must be at least 1, got {self.DEGREE}")
        if self.GAP_MODULUS < 2:
            raise ConfigError(
                f"gap modulus must be at least 2, got {self.GAP_MODULUS}; "
                "a modulus of 1 removes every coefficient of the source curve")
        if self.HARMONIC is not None and (self.HARMONIC <= 0 or self.HARMONIC % self.GAP_MODULUS):
            raise ConfigError(f"harmonic {self.HARMONIC} must be a positive multiple of {self.GAP_MODULUS}")
        if self.SUBSET_CAP < 1:
            raise ConfigError(f"subset cap must be positive, got {self.SUBSET_CAP}")
        if self.NO_BALANCED is not None and self.NO_BALANCED < 1:
            raise ConfigError(f"--no-balanced needs n ≥ 1, got {self.NO_BALANCED}")
        if self.WORKERS < 1 or self.COLUMNS < 1 or self.STROKE_WIDTH <= 0:
            raise ConfigError("workers and columns must be at least 1 and the stroke width positive")
        self.generator()
        return True

    def generator(self):
        from familygen import Generator
        try:
            return Generator.parse(self.GENERATOR)
        except ValidationError as e:
            raise ConfigError(str(e))

    def print_config_status(self):
        """Print configuration status for debugging"""
        lambdas = self.lambda_values()
        print("📋 Configuration Status:")
        print(f"   Command: {self.COMMAND}")
        print(f"   Input: {self.INPUT_PATH or '(generated)'}")
        print(f"   Output: {self.OUTPUT_PATH}")
        print(f"   Grid: {self.GRID}")
        print(f"   λ values: {len(lambdas)} in [{min(lambdas):g}, {max(lambdas):g}]")
        print(f"   Tolerances: scan {self.TOL:.1e}, moments {self.MOMENT_TOL:.1e}, levels {self.LEVEL_TOL:.1e}")
        print(f"   Seed: {'✅ ' + str(self.SEED) if self.SEED is not None else '⚠️ not set (non-reproducible)'}")
        print(f"   Curve: degree {self.DEGREE}, M={self.GAP_MODULUS}, g={self.GENERATOR}")
        print(f"   Workers: {self.WORKERS}")
