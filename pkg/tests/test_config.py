import pytest

from config import RunConfig
from exceptions import ConfigError


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("GRID", "TOL", "SEED", "OUTPUT_PATH", "LAMBDAS", "WORKERS"):
        monkeypatch.delenv(f"CURVEFAMILY_{name}", raising=False)


def test_defaults():
    config = RunConfig()
    assert config.GRID == 4096
    assert config.TOL == 1e-7
    assert config.SEED is None
    assert config.MAX_MOMENT == 12
    assert config.validate()


def test_default_lambda_grid():
    values = RunConfig().lambda_values()
    assert len(values) == 21
    assert values[0] == -5.0 and values[10] == 0.0 and values[-1] == 5.0


def test_explicit_lambdas_win():
    config = RunConfig.from_sources({"LAMBDAS": "0, 0.1, 0.2"})
    assert config.lambda_values() == [0.0, 0.1, 0.2]


def test_lambda_step_without_drift():
    config = RunConfig.from_sources({"LAMBDA_MIN": 0.0, "LAMBDA_MAX": 0.7, "LAMBDA_STEP": 0.1})
    assert config.lambda_values() == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]


def test_environment(monkeypatch):
    monkeypatch.setenv("CURVEFAMILY_GRID", "1024")
    monkeypatch.setenv("CURVEFAMILY_SEED", "7")
    config = RunConfig()
    assert config.GRID == 1024
    assert config.SEED == 7


def test_bad_environment_value(monkeypatch):
    monkeypatch.setenv("CURVEFAMILY_GRID", "many")
    with pytest.raises(ConfigError, match="CURVEFAMILY_GRID"):
        RunConfig()


def test_file_overrides_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("CURVEFAMILY_GRID", "1024")
    path = tmp_path / "run.env"
    path.write_text("CURVEFAMILY_GRID=2048\ntol=1e-9\n")
    config = RunConfig.from_sources(config_file=str(path))
    assert config.GRID == 2048
    assert config.TOL == 1e-9


def test_flags_override_file(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("GRID=2048\nSEED=3\n")
    config = RunConfig.from_sources({"GRID": 512, "SEED": None}, str(path))
    assert config.GRID == 512
    assert config.SEED == 3


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        RunConfig.from_sources(config_file="/nonexistent/run.env")


def test_unknown_key():
    with pytest.raises(ConfigError, match="BOGUS"):
        RunConfig.from_sources({"bogus": 1})


def test_bad_file_value(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("GRID=lots\n")
    with pytest.raises(ConfigError):
        RunConfig.from_sources(config_file=str(path))


@pytest.mark.parametrize("overrides, message", [
    ({"COMMAND": "draw"}, "unknown command"),
    ({"GRID": 16}, "grid"),
    ({"LAMBDA_STEP": 0.0}, "step"),
    ({"LAMBDA_MIN": 1.0, "LAMBDA_MAX": 0.0}, "empty"),
    ({"TOL": 0.0}, "TOL"),
    ({"MAX_MOMENT": 25}, "max moment"),
    ({"DEGREE": 0}, "degree"),
    ({"GAP_MODULUS": 1}, "gap modulus"),
    ({"GAP_MODULUS": 4, "HARMONIC": 6}, "multiple"),
    ({"NO_BALANCED": 0}, "no-balanced"),
    ({"WORKERS": 0}, "workers"),
    ({"GENERATOR": "cosh"}, "cosh"),
])
def test_validation(overrides, message):
    config = RunConfig.from_sources(overrides)
    with pytest.raises(ConfigError, match=message):
        config.validate()


def test_print_config_status(capsys):
    RunConfig.from_sources({"SEED": 7}).print_config_status()
    out = capsys.readouterr().out
    assert "Grid: 4096" in out
    assert "✅ 7" in out
