"""
Logging Configuration for perctrunc
"""
import logging
import logging.config
import os
import sys
from pathlib import Path
from typing import Any, Dict, Optional

import structlog


def setup_logging(
    log_level: str = "INFO",
    log_file: Optional[str] = None,
    enable_json_logging: bool = False,
):
    """
    Setup logging configuration for perctrunc

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Path to a rotating log file (optional)
        enable_json_logging: Emit JSON records instead of plain text

    Console output goes to stderr; stdout is reserved for command results.
    """
    handlers: Dict[str, Dict[str, Any]] = {
        "console": {
            "class": "logging.StreamHandler",
            "level": log_level,
            "formatter": "json" if enable_json_logging else "standard",
            "stream": sys.stderr,
        }
    }

    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers["file"] = {
            "class": "logging.handlers.RotatingFileHandler",
            "level": log_level,
            "formatter": "json" if enable_json_logging else "detailed",
            "filename": str(log_file),
            "maxBytes": 10485760,  # 10MB
            "backupCount": 5,
            "encoding": "utf8",
        }

    config = {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "standard": {
                "format": "%(asctime)s [%(levelname)s] %(name)s: %(message)s",
                "datefmt": "%Y-%m-%d %H:%M:%S",
            },
            "detailed": {
                "format": "%(asctime)s [%(levelname)s] %(name)s:%(lineno)d - %(funcName)s() - %(message)s",
                "datefmt": "%Y-%m-%d %H:%M:%S",
            },
            "json": {
                "()": "pythonjsonlogger.jsonlogger.JsonFormatter",
                "format": "%(asctime)s %(name)s %(levelname)s %(message)s %(funcName)s",
            },
        },
        "handlers": handlers,
        "loggers": {
            "": {
                "handlers": list(handlers),
                "level": log_level,
                "propagate": False,
            },
            "matplotlib": {
                "handlers": list(handlers),
                "level": "WARNING",
                "propagate": False,
            },
        },
    }

    logging.config.dictConfig(config)
    setup_structured_logging(enable_json_logging)

    logger = logging.getLogger(__name__)
    logger.debug(f"Logging configured - Level: {log_level}, File: {log_file}")
    return logger


def setup_structured_logging(enable_json_logging: bool = False):
    """Route structlog through the stdlib handlers and tag every record"""

    class ContextFilter(logging.Filter):
        """Add toolkit context to log records"""

        def filter(self, record):
            record.app_name = "perctrunc"
            record.environment = os.getenv("PERCTRUNC_ENVIRONMENT", "production")
            return True

    context_filter = ContextFilter()
    for handler in logging.getLogger().handlers:
        handler.addFilter(context_filter)

    renderer = (
        structlog.processors.JSONRenderer(sort_keys=True)
        if enable_json_logging
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.format_exc_info,
            renderer,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=False,
    )


def get_logger(name: str) -> logging.Logger:
    """Get a logger instance with the specified name"""
    return logging.getLogger(name)


# Domain logging helpers
def log_parameter_choice(kind: str, params: Dict[str, Any]):
    """Log the outcome of a construction parameter search"""
    logger = get_logger("params")
    rendered = ", ".join(f"{k}={v}" for k, v in params.items())
    logger.info(f"Chose {kind} parameters: {rendered}", extra={"kind": kind, **params})


def log_estimate(experiment: str, successes: int, trials: int, estimate: float, ci: tuple):
    """Log a Monte Carlo estimate"""
    logger = get_logger("estimates")
    logger.info(
        f"{experiment}: {successes}/{trials} = {estimate:.5f} (CI {ci[0]:.5f}..{ci[1]:.5f})",
        extra={
            "experiment": experiment,
            "successes": successes,
            "trials": trials,
            "estimate": estimate,
            "ci_low": ci[0],
            "ci_high": ci[1],
        },
    )


def log_coupling_report(check: str, checks: int, violations: int):
    """Log a coupling verification tally; any violation is a warning"""
    logger = get_logger("coupling")
    log_data = {"check": check, "checks": checks, "violations": violations}
    message = f"Coupling check {check}: {violations} violations in {checks} checks"

    if violations:
        logger.warning(message, extra=log_data)
    else:
        logger.info(message, extra=log_data)
