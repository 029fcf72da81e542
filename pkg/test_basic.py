"""
Basic tests for settings, logging, metrics and errors
"""
import json
import logging
import os
import sys

import pytest
from prometheus_client import REGISTRY

sys.path.insert(0, os.path.dirname(__file__))
os.environ.setdefault("PERCTRUNC_ENVIRONMENT", "testing")


def test_basic_imports():
    """Test that toolkit modules can be imported"""
    try:
        import aniso  # noqa: F401
        import harness  # noqa: F401
        import redbonds  # noqa: F401
        import redsites  # noqa: F401
        import renorm  # noqa: F401
    except ImportError as e:
        pytest.fail(f"Import failed: {e}")


class TestSettings:
    """Test environment-driven settings"""

    def test_testing_profile(self):
        from config import TestingSettings, get_settings
        settings = get_settings()
        assert isinstance(settings, TestingSettings)
        assert settings.threads == 1
        assert settings.default_horizon == 10**5

    def test_env_override(self, monkeypatch):
        from config import Settings
        monkeypatch.setenv("PERCTRUNC_THREADS", "3")
        monkeypatch.setenv("PERCTRUNC_LOG_LEVEL", "debug")
        settings = Settings()
        assert settings.threads == 3
        assert settings.log_level == "DEBUG"

    @pytest.mark.parametrize("name, value", [("PERCTRUNC_THREADS", "0"), ("PERCTRUNC_CONFIDENCE", "1.5"),
                                             ("PERCTRUNC_LOG_LEVEL", "LOUD")])
    def test_invalid_values(self, monkeypatch, name, value):
        from pydantic import ValidationError

        from config import Settings
        monkeypatch.setenv(name, value)
        with pytest.raises(ValidationError):
            Settings()


class TestLogging:
    """Test logging setup"""

    def test_json_records(self, capsys):
        from logging_config import get_logger, setup_logging
        setup_logging("INFO", enable_json_logging=True)
        get_logger("estimates").info("hello", extra={"trials": 3})
        line = capsys.readouterr().err.strip().splitlines()[-1]
        record = json.loads(line)
        assert record["message"] == "hello"
        assert record["trials"] == 3
        setup_logging("WARNING")

    def test_coupling_report_level(self, caplog):
        from logging_config import log_coupling_report
        with caplog.at_level(logging.INFO, logger="coupling"):
            log_coupling_report("red_bonds", 10, 0)
            log_coupling_report("red_bonds", 10, 2)
        levels = [r.levelno for r in caplog.records if r.name == "coupling"]
        assert levels == [logging.INFO, logging.WARNING]

    def test_log_file(self, tmp_path):
        from logging_config import get_logger, setup_logging
        path = tmp_path / "logs" / "perctrunc.log"
        setup_logging("INFO", str(path))
        get_logger("params").info("written")
        for handler in logging.getLogger().handlers:
            handler.flush()
        assert "written" in path.read_text()
        setup_logging("WARNING")


class TestMetrics:
    """Test Prometheus counters"""

    def test_trial_counters(self):
        from metrics import record_trials
        before = REGISTRY.get_sample_value("perctrunc_trials_total", {"experiment": "unit"}) or 0.0
        record_trials("unit", 10, 4)
        assert REGISTRY.get_sample_value("perctrunc_trials_total", {"experiment": "unit"}) == before + 10

    def test_coupling_counters(self):
        from metrics import record_coupling_check
        record_coupling_check("unit", 5, 1)
        assert REGISTRY.get_sample_value("perctrunc_coupling_violations_total", {"check": "unit"}) >= 1

    def test_track_experiment(self):
        from metrics import track_experiment

        @track_experiment("unit")
        def work():
            return 42

        before = REGISTRY.get_sample_value("perctrunc_experiment_duration_seconds_count", {"experiment": "unit"}) or 0
        assert work() == 42
        after = REGISTRY.get_sample_value("perctrunc_experiment_duration_seconds_count", {"experiment": "unit"})
        assert after == before + 1

    def test_write_metrics(self, tmp_path):
        from metrics import write_metrics
        path = tmp_path / "metrics.prom"
        write_metrics(str(path))
        assert "perctrunc_app_info" in path.read_text()


class TestErrors:
    """Test the exception hierarchy"""

    def test_exit_codes(self):
        from errors import (
            ContractViolation,
            DomainError,
            InvariantViolation,
            ResultFileError,
            SequenceSpecError,
            UnsatisfiableParameters,
        )
        assert DomainError.exit_code == 2
        assert SequenceSpecError.exit_code == 2
        assert ContractViolation.exit_code == 2
        assert UnsatisfiableParameters.exit_code == 3
        assert ResultFileError.exit_code == 4
        assert InvariantViolation.exit_code == 1

    def test_domain_errors_are_value_errors(self):
        from errors import SequenceSpecError
        assert issubclass(SequenceSpecError, ValueError)
