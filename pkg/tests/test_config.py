"""Test cases for run configuration loading"""

import json
import os
from pathlib import Path
from unittest.mock import patch

import pytest

from src.logistic_steady.config import (
    DomainConfig,
    LambdaMode,
    RunConfig,
    Variant,
    apply_overrides,
    build_problem,
    load_config,
    load_settings,
)
from src.logistic_steady.errors import ConfigError
from src.logistic_steady.grid import DomainKind
from src.logistic_steady.problem import ZeroSetKind

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = {
    "name": "minimal",
    "variant": "main",
    "problem": {
        "beta": 3.0,
        "lambda": 12.5,
        "a": {"family": "algebraic", "params": {"power": 4.0}},
        "b": {"family": "plateau", "params": {"beta": 3.0, "radius": 1.0}},
        "h": {"family": "gaussian"},
        "g": {"terms": [[1.0, 4.0]]},
        "zero_set": {"kind": "ball", "radius": 1.0},
    },
    "domain": {"kind": "whole", "radius": 50.0, "intervals": 200, "stretch": 1.02},
}


def write_config(tmp_path, payload):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(payload))
    return path


class TestLoadConfig:
    """Test suite for JSON run files"""

    def test_load_minimal(self, tmp_path):
        """Test a minimal valid configuration with defaults filled in"""
        config = load_config(write_config(tmp_path, MINIMAL))
        assert config.variant == Variant.MAIN
        assert config.problem.lambda_config.mode == LambdaMode.NUMBER
        assert config.problem.lambda_config.value == 12.5
        assert config.problem.mu == 0.0
        assert config.solver.tol == 1e-9
        assert config.domain.kind == DomainKind.WHOLE

    @pytest.mark.parametrize("name", sorted(p.name for p in CONFIG_DIR.glob("*.json")))
    def test_shipped_configs_validate(self, name):
        """Test that every shipped configuration parses"""
        config = load_config(CONFIG_DIR / name)
        assert config.name

    def test_missing_file(self, tmp_path):
        """Test a missing file maps to a configuration error"""
        with pytest.raises(ConfigError, match="not found") as exc:
            load_config(tmp_path / "absent.json")
        assert exc.value.exit_code == 2

    def test_malformed_json(self, tmp_path):
        """Test that broken JSON is a configuration error"""
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)

    def test_invalid_lambda_mode(self, tmp_path):
        """Test the scaled mode without a factor"""
        payload = json.loads(json.dumps(MINIMAL))
        payload["problem"]["lambda"] = {"mode": "scaled"}
        with pytest.raises(ConfigError, match="factor"):
            load_config(write_config(tmp_path, payload))

    def test_growth_coefficient_required(self, tmp_path):
        """Test that a problem without b or upsilon is rejected"""
        payload = json.loads(json.dumps(MINIMAL))
        del payload["problem"]["b"]
        with pytest.raises(ConfigError, match="upsilon"):
            load_config(write_config(tmp_path, payload))

    def test_verify_needs_oracle(self):
        """Test the section guards"""
        config = RunConfig(variant=Variant.VERIFY)
        with pytest.raises(ConfigError, match="oracle"):
            config.require_oracle()
        with pytest.raises(ConfigError, match="problem"):
            config.require_problem()


class TestOverrides:
    """Test suite for command-line overrides"""

    def test_overrides_take_precedence(self, tmp_path):
        """Test grid, radius, tolerance and mu overrides"""
        config = load_config(write_config(tmp_path, MINIMAL))
        updated = apply_overrides(config, variant="related", mu=0.3, grid_nodes=100, r_infinity=80.0, tol=1e-8)
        assert updated.variant == Variant.RELATED
        assert updated.problem.mu == 0.3
        assert updated.domain.intervals == 100
        assert updated.domain.radius == 80.0
        assert updated.solver.tol == 1e-8
        assert config.domain.intervals == 200

    def test_unknown_variant(self, tmp_path):
        """Test that an unknown variant is a configuration error"""
        config = load_config(write_config(tmp_path, MINIMAL))
        with pytest.raises(ConfigError):
            apply_overrides(config, variant="sideways")

    def test_echo_uses_lambda_alias(self, tmp_path):
        """Test that the echoed configuration round-trips through the loader"""
        config = load_config(write_config(tmp_path, MINIMAL))
        echo = config.echo()
        assert echo["problem"]["lambda"] == 12.5
        assert RunConfig.model_validate(echo).problem.lam == 12.5


class TestBuildProblem:
    """Test suite for assembling problems from configuration"""

    def test_build_main_problem(self, tmp_path):
        """Test the assembled problem definition"""
        config = load_config(write_config(tmp_path, MINIMAL))
        spec = build_problem(config.problem, config.domain, 12.5)
        assert spec.lam == 12.5
        assert spec.zero_set.kind == ZeroSetKind.BALL
        assert spec.b(0.5) == 0.0
        assert spec.domain == DomainKind.WHOLE

    def test_unknown_family_is_config_error(self, tmp_path):
        """Test that unknown families surface as configuration errors"""
        payload = json.loads(json.dumps(MINIMAL))
        payload["problem"]["h"] = {"family": "mystery"}
        config = load_config(write_config(tmp_path, payload))
        with pytest.raises(ConfigError, match="Cannot build problem"):
            build_problem(config.problem, config.domain, 1.0)

    def test_domain_build(self):
        """Test the grid built from the domain section"""
        grid = DomainConfig(kind=DomainKind.BALL, radius=2.0, intervals=64).build(3)
        assert grid.radius == 2.0 and grid.intervals == 64


class TestSettings:
    """Test suite for environment settings"""

    def test_defaults(self):
        """Test the default seed and log level"""
        with patch.dict(os.environ, {}, clear=True):
            settings = load_settings()
        assert settings.seed == 0
        assert settings.log_level == "INFO"

    def test_environment_values(self):
        """Test values read from the environment"""
        env = {"LOGISTIC_STEADY_SEED": "7", "LOGISTIC_STEADY_LOG_LEVEL": "debug"}
        with patch.dict(os.environ, env, clear=True):
            settings = load_settings()
        assert settings.seed == 7
        assert settings.log_level == "DEBUG"

    def test_bad_seed(self):
        """Test a non-integer seed"""
        with patch.dict(os.environ, {"LOGISTIC_STEADY_SEED": "abc"}, clear=True):
            with pytest.raises(ConfigError, match="integer"):
                load_settings()
