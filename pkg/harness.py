"""
Experiment harness for perctrunc

An ExperimentConfig names one operation and its parameters; run() turns it
into a ResultRecord, sweep() repeats it along one axis on a shared master
seed. Records keep wall-clock data in `timing` only, so two runs of the
same config produce identical JSON outside that field.
"""
import json
import time
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
import structlog  # noqa: E402
import yaml  # noqa: E402
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator  # noqa: E402

from aniso import kesten_crossing, kw_connect_prob, kw_outcomes  # noqa: E402
from config import get_settings  # noqa: E402
from errors import DomainError, ResultFileError  # noqa: E402
from metrics import track_experiment  # noqa: E402
from montecarlo import EstimateResult, build_estimate  # noqa: E402
from oriented import estimate_survival, survival_depths, survival_outcomes  # noqa: E402
from redbonds import Thm2Layout, prob_H_exact, verify_thm2_trials  # noqa: E402
from redsites import choose_thm3_params, red_site_runs  # noqa: E402
from renorm import (  # noqa: E402
    Sign,
    choose_block_params,
    estimate_exploration_survival,
    estimate_site_threshold,
    prob_L,
    prob_S_exact,
    prob_T_exact,
    verify_exploration_runs,
)
from sampler import ENCODING_VERSION, GENERATOR  # noqa: E402
from sequences import SequenceLike, diagnose, parse_sequence_spec  # noqa: E402

logger = structlog.get_logger(__name__)

SCHEMA_VERSION = 1
CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = ["axis", "value", "estimate", "ci_lo", "ci_hi", "trials", "successes", "violations"]

MONOTONE_AXES = ("K", "H", "L")
INTEGER_FIELDS = ("K", "H", "L", "d", "l", "n", "N", "steps", "height", "box", "window")


class Operation(str, Enum):
    ANALYZE = "analyze"
    SIMULATE_ORIENTED = "simulate-oriented"
    BLOCK_PARAMS = "block-params"
    EXPLORE = "explore"
    THM2 = "aniso-thm2"
    THM3 = "aniso-thm3"
    KW = "kw"
    KESTEN = "kesten"
    SITE_THRESHOLD = "site-threshold"


REQUIRED: Dict[Operation, Tuple[str, ...]] = {
    Operation.ANALYZE: ("seq",),
    Operation.SIMULATE_ORIENTED: ("seq", "K", "H"),
    Operation.BLOCK_PARAMS: ("seq", "epsilon"),
    Operation.EXPLORE: ("seq", "epsilon"),
    Operation.THM2: ("seq", "delta", "N", "epsilon", "box"),
    Operation.THM3: ("seq", "delta", "epsilon", "height"),
    Operation.KW: ("seq", "l", "L"),
    Operation.KESTEN: ("pv", "ph", "n"),
    Operation.SITE_THRESHOLD: ("gammas", "height"),
}

# operations a sweep can drive, and the axes each accepts
SWEEPABLE: Dict[Operation, Tuple[str, ...]] = {
    Operation.SIMULATE_ORIENTED: ("K", "H", "d"),
    Operation.EXPLORE: ("epsilon", "steps"),
    Operation.THM3: ("delta", "epsilon", "height"),
    Operation.KW: ("L", "l"),
    Operation.KESTEN: ("pv", "ph", "n"),
}


class SweepSpec(BaseModel):
    axis: str
    values: List[float] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _check_values(self):
        if self.axis in MONOTONE_AXES:
            if any(v != int(v) for v in self.values):
                raise ValueError(f"{self.axis} values must be integers")
            if any(b <= a for a, b in zip(self.values, self.values[1:])):
                raise ValueError(f"{self.axis} values must be strictly increasing")
        return self


class ExperimentConfig(BaseModel):
    """One experiment: an operation, its parameters and where results go"""

    model_config = ConfigDict(extra="forbid")

    operation: Operation
    seq: Optional[str] = Field(None, description="Sequence spec, e.g. 'const:p=0.5' or 'invsqrt'")
    K: Optional[int] = Field(None, ge=1)
    H: Optional[int] = Field(None, ge=1)
    d: int = Field(1, ge=1)
    epsilon: Optional[float] = None
    delta: Optional[float] = Field(None, ge=0.0, le=1.0)
    N: Optional[int] = Field(None, ge=1)
    eta: Optional[float] = Field(None, gt=0.0)
    threshold: Optional[float] = Field(None, gt=0.0, lt=1.0)
    window: Optional[int] = Field(None, ge=3)
    box: Optional[int] = Field(None, ge=2)
    height: Optional[int] = Field(None, ge=1)
    l: Optional[int] = Field(None, ge=1)
    L: Optional[int] = Field(None, ge=1)
    pv: Optional[float] = Field(None, ge=0.0, le=1.0)
    ph: Optional[float] = Field(None, ge=0.0, le=1.0)
    n: Optional[int] = Field(None, ge=2)
    gammas: Optional[List[float]] = None
    layout: Thm2Layout = Thm2Layout.SEPARATED
    steps: int = Field(1000, ge=1, description="Exploration visits per run")
    verify: bool = Field(False, description="Also replay explorations against the configuration")
    horizon: Optional[int] = Field(None, ge=1)
    max_shift: int = Field(10, ge=1)
    trials: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0, le=2**64 - 1)
    workers: Optional[int] = Field(None, ge=1)
    output: Optional[str] = None
    csv: Optional[str] = None
    sweep: Optional[SweepSpec] = None

    @field_validator("epsilon")
    @classmethod
    def validate_epsilon(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not 0.0 < v < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        return v

    @field_validator("seq")
    @classmethod
    def validate_seq(cls, v: Optional[str]) -> Optional[str]:
        if v is not None:
            parse_sequence_spec(v)
        return v

    @model_validator(mode="after")
    def _check_required(self):
        if self.operation is Operation.SIMULATE_ORIENTED and self.height is not None:
            # --height names the target level of oriented survival
            if self.H is not None and self.H != self.height:
                raise ValueError(f"H={self.H} and height={self.height} disagree")
            self.H, self.height = self.height, None
        swept = self.sweep.axis if self.sweep else None
        missing = [name for name in REQUIRED[self.operation] if getattr(self, name) is None and name != swept]
        if missing:
            raise ValueError(f"{self.operation.value} needs {', '.join(missing)}")
        if self.sweep is not None:
            allowed = SWEEPABLE.get(self.operation, ())
            if self.sweep.axis not in allowed:
                raise ValueError(f"{self.operation.value} cannot sweep '{self.sweep.axis}' (allowed: {allowed})")
        return self

    def sequence(self) -> SequenceLike:
        return parse_sequence_spec(self.seq)

    def echo(self) -> Dict[str, Any]:
        """Config as recorded in results; output locations are not part of it"""
        return self.model_dump(mode="json", exclude={"output", "csv", "workers"}, exclude_none=True)

    def at(self, axis: str, value: float) -> "ExperimentConfig":
        if axis in INTEGER_FIELDS:
            value = int(value)
        data = self.model_dump(exclude={"sweep"})
        data[axis] = value
        return ExperimentConfig(**data)


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """YAML document mirroring the CLI flags; overrides win over file values"""
    data: Dict[str, Any] = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                loaded = yaml.safe_load(fh)
            except yaml.YAMLError as e:
                raise DomainError(f"config file {path} is not valid YAML: {e}") from e
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise DomainError(f"config file {path} must hold a mapping")
        data.update(loaded)
    for key, value in (overrides or {}).items():
        if key == "sweep" and isinstance(value, dict) and isinstance(data.get("sweep"), dict):
            data["sweep"] = {**data["sweep"], **value}
        else:
            data[key] = value
    return ExperimentConfig(**data)


class Timing(BaseModel):
    started: str
    finished: str
    wall_time: float


class ResultRecord(BaseModel):
    schema_version: int = SCHEMA_VERSION
    operation: Operation
    config: Dict[str, Any]
    payload: Dict[str, Any] = Field(default_factory=dict)
    rows: List[Dict[str, Any]] = Field(default_factory=list)
    generator: str = GENERATOR
    encoding_version: int = ENCODING_VERSION
    timing: Timing

    def reproducible_json(self) -> str:
        """Everything except timing, serialized deterministically"""
        return json.dumps(self.model_dump(mode="json", exclude={"timing"}), sort_keys=True)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2)

    def write(self, path: Union[str, Path]):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n", encoding="utf-8")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _estimate_payload(est: EstimateResult) -> Dict[str, Any]:
    return est.payload()


# Operation handlers: config -> payload

def _analyze(config: ExperimentConfig) -> Dict[str, Any]:
    horizon = config.horizon or get_settings().default_horizon
    return diagnose(config.sequence(), horizon, config.max_shift).model_dump(mode="json")


def _simulate_oriented(config: ExperimentConfig) -> Dict[str, Any]:
    est = estimate_survival(config.sequence(), config.K, config.H, config.d, config.trials, config.seed,
                            config.workers)
    return {
        "model": "oriented",
        "seq": config.sequence().spec_string,
        "K": config.K,
        "H": config.H,
        "d": config.d,
        "trials": est.trials,
        "successes": est.successes,
        "estimate": est.estimate,
        "ci": [est.ci_low, est.ci_high],
        "seed": config.seed,
        "generator_version": f"{GENERATOR}/{ENCODING_VERSION}",
    }


def _block_params(config: ExperimentConfig) -> Dict[str, Any]:
    seq = config.sequence()
    bp = choose_block_params(seq, config.epsilon, config.horizon)
    return {
        "block_params": bp.model_dump(mode="json"),
        "prob_L": prob_L(seq, config.horizon),
        "prob_S": prob_S_exact(seq, bp.k, bp.K),
        "prob_T": prob_T_exact(seq, bp),
        "one_minus_epsilon": 1.0 - config.epsilon,
    }


def _explore(config: ExperimentConfig) -> Dict[str, Any]:
    seq = config.sequence()
    survival = estimate_exploration_survival(seq, config.epsilon, config.trials, config.steps, config.seed,
                                             config.horizon, config.workers)
    payload = survival.model_dump(mode="json")
    payload["estimate"] = _estimate_payload(survival.estimate)
    if config.verify:
        report = verify_exploration_runs(seq, survival.block_params, config.trials, config.steps, config.seed,
                                         config.workers)
        payload["coupling"] = {**report.model_dump(mode="json"), "violations": report.violations}
    return payload


def _thm2(config: ExperimentConfig) -> Dict[str, Any]:
    seq = config.sequence()
    params, report = verify_thm2_trials(seq, config.delta, config.N, config.epsilon, config.box, config.trials,
                                        config.seed, config.horizon, config.layout, config.workers)
    return {
        "params": params.model_dump(mode="json"),
        "report": report.model_dump(mode="json"),
        "violations": report.violations,
        "marginals_within_4_sigma": report.marginals_within(4.0),
        "prob_H_minus": prob_H_exact(seq, params, Sign.MINUS),
        "prob_H_plus": prob_H_exact(seq, params, Sign.PLUS),
    }


def _thm3(config: ExperimentConfig) -> Dict[str, Any]:
    seq = config.sequence()
    params = choose_thm3_params(seq, config.delta, config.epsilon, window=config.window, horizon=config.horizon,
                                eta=config.eta, threshold=config.threshold, trials=config.trials,
                                master_seed=config.seed, workers=config.workers)
    summary = red_site_runs(seq, params, config.height, config.trials, config.seed, config.workers)
    payload = summary.model_dump(mode="json")
    payload["estimate"] = _estimate_payload(summary.estimate)
    payload["violations"] = summary.violations
    return payload


def _kw(config: ExperimentConfig) -> Dict[str, Any]:
    return _estimate_payload(kw_connect_prob(config.sequence(), config.l, config.L, config.trials, config.seed,
                                             config.workers))


def _kesten(config: ExperimentConfig) -> Dict[str, Any]:
    return _estimate_payload(kesten_crossing(config.pv, config.ph, config.n, config.trials, config.seed,
                                             config.workers))


def _site_threshold(config: ExperimentConfig) -> Dict[str, Any]:
    return estimate_site_threshold(config.gammas, config.height, config.trials, config.seed).model_dump(mode="json")


HANDLERS: Dict[Operation, Callable[[ExperimentConfig], Dict[str, Any]]] = {
    Operation.ANALYZE: _analyze,
    Operation.SIMULATE_ORIENTED: _simulate_oriented,
    Operation.BLOCK_PARAMS: _block_params,
    Operation.EXPLORE: _explore,
    Operation.THM2: _thm2,
    Operation.THM3: _thm3,
    Operation.KW: _kw,
    Operation.KESTEN: _kesten,
    Operation.SITE_THRESHOLD: _site_threshold,
}


@track_experiment("run")
def run(config: ExperimentConfig) -> ResultRecord:
    """Dispatch a single experiment"""
    if config.sweep is not None:
        return sweep(config)
    started, t0 = _now(), time.perf_counter()
    logger.info("experiment_started", operation=config.operation.value, seed=config.seed)
    payload = HANDLERS[config.operation](config)
    record = ResultRecord(
        operation=config.operation,
        config=config.echo(),
        payload=payload,
        timing=Timing(started=started, finished=_now(), wall_time=time.perf_counter() - t0),
    )
    logger.info("experiment_finished", operation=config.operation.value, wall_time=record.timing.wall_time)
    return record


# Sweeps

def _row(axis: str, value: float, est: EstimateResult, violations: int = 0) -> Dict[str, Any]:
    return {
        "axis": axis,
        "value": value,
        "estimate": est.estimate,
        "ci_lo": est.ci_low,
        "ci_hi": est.ci_high,
        "trials": est.trials,
        "successes": est.successes,
        "violations": violations,
    }


def _point_estimate(config: ExperimentConfig) -> EstimateResult:
    op = config.operation
    if op is Operation.SIMULATE_ORIENTED:
        return estimate_survival(config.sequence(), config.K, config.H, config.d, config.trials, config.seed,
                                 config.workers)
    if op is Operation.EXPLORE:
        return estimate_exploration_survival(config.sequence(), config.epsilon, config.trials, config.steps,
                                             config.seed, config.horizon, config.workers).estimate
    if op is Operation.THM3:
        params = choose_thm3_params(config.sequence(), config.delta, config.epsilon, window=config.window,
                                    horizon=config.horizon, eta=config.eta, threshold=config.threshold,
                                    trials=config.trials, master_seed=config.seed, workers=config.workers)
        return red_site_runs(config.sequence(), params, config.height, config.trials, config.seed,
                             config.workers).estimate
    if op is Operation.KW:
        return kw_connect_prob(config.sequence(), config.l, config.L, config.trials, config.seed, config.workers)
    if op is Operation.KESTEN:
        return kesten_crossing(config.pv, config.ph, config.n, config.trials, config.seed, config.workers)
    raise DomainError(f"{op.value} has no single estimate to sweep")


def _coupled_rows(config: ExperimentConfig) -> Optional[List[Dict[str, Any]]]:
    """Rows for axes sampled on shared configurations, or None"""
    axis, values = config.sweep.axis, [int(v) for v in config.sweep.values]
    op = config.operation

    if op is Operation.SIMULATE_ORIENTED and axis == "K":
        outcomes, violations = survival_outcomes(config.sequence(), values, config.H, config.d, config.trials,
                                                 config.seed, config.workers)
    elif op is Operation.SIMULATE_ORIENTED and axis == "H":
        depths = survival_depths(config.sequence(), config.K, values[-1], config.d, config.trials, config.seed,
                                 config.workers)
        outcomes = [tuple(depth >= h for h in values) for depth in depths]
        violations = sum(1 for row in outcomes if any(b and not a for a, b in zip(row, row[1:])))
    elif op is Operation.KW and axis == "L":
        outcomes, violations = kw_outcomes(config.sequence(), config.l, values, config.trials, config.seed,
                                           config.workers)
    else:
        return None

    experiment = "oriented" if op is Operation.SIMULATE_ORIENTED else "kw"
    rows = []
    for j, value in enumerate(values):
        successes = sum(1 for row in outcomes if row[j])
        est = build_estimate(successes, config.trials, config.seed, experiment=experiment)
        rows.append(_row(axis, value, est, violations))
    return rows


@track_experiment("sweep")
def sweep(config: ExperimentConfig) -> ResultRecord:
    """One row per axis value, all on the same master seed"""
    if config.sweep is None:
        raise DomainError("sweep needs an axis and values")
    started, t0 = _now(), time.perf_counter()
    axis = config.sweep.axis
    logger.info("sweep_started", operation=config.operation.value, axis=axis, points=len(config.sweep.values))

    rows = _coupled_rows(config)
    if rows is None:
        rows = [_row(axis, value, _point_estimate(config.at(axis, value))) for value in config.sweep.values]
    violations = rows[0]["violations"]

    record = ResultRecord(
        operation=config.operation,
        config=config.echo(),
        payload={"axis": axis, "points": len(rows), "monotonicity_violations": violations,
                 "csv_schema_version": CSV_SCHEMA_VERSION},
        rows=rows,
        timing=Timing(started=started, finished=_now(), wall_time=time.perf_counter() - t0),
    )
    if violations:
        logger.error("sweep_monotonicity_violated", axis=axis, violations=violations)
    return record


def write_csv(rows: List[Dict[str, Any]], path: Union[str, Path]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=CSV_COLUMNS).to_csv(path, index=False)


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError as e:
        raise ResultFileError(f"{path} is empty") from e
    except pd.errors.ParserError as e:
        raise ResultFileError(f"{path} is not a valid CSV file: {e}") from e

    missing = [c for c in ("value", "estimate", "ci_lo", "ci_hi") if c not in frame.columns]
    if missing:
        raise ResultFileError(f"{path} lacks columns {missing}")
    if frame.empty:
        raise ResultFileError(f"{path} has no rows")
    try:
        frame[["value", "estimate", "ci_lo", "ci_hi"]] = frame[["value", "estimate", "ci_lo", "ci_hi"]].astype(float)
    except ValueError as e:
        raise ResultFileError(f"{path} holds non-numeric estimates") from e
    return frame


def emit_plot(csv_path: Union[str, Path], svg_path: Union[str, Path]) -> Path:
    """Estimate against the swept value, with confidence whiskers, as a static SVG"""
    frame = read_csv(csv_path).sort_values("value")
    x = frame["value"].to_numpy()
    y = frame["estimate"].to_numpy()
    yerr = np.vstack([y - frame["ci_lo"].to_numpy(), frame["ci_hi"].to_numpy() - y])
    axis = str(frame["axis"].iloc[0]) if "axis" in frame.columns else "value"

    with plt.rc_context({"svg.fonttype": "path", "svg.hashsalt": "perctrunc"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.errorbar(x, y, yerr=yerr, fmt="none", ecolor="grey", capsize=3)
        (line,) = ax.plot(x, y, marker="o", color="black")
        line.set_gid("estimates")
        if axis in ("K", "L") and x.min() > 0 and x.max() / x.min() >= 10:
            ax.set_xscale("log", base=2)
        ax.set_xlabel(axis)
        ax.set_ylabel("estimate")
        ax.set_ylim(-0.02, 1.02)
        ax.grid(True, alpha=0.3)

        svg_path = Path(svg_path)
        svg_path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
        plt.close(fig)

    logger.info("plot_written", csv=str(csv_path), svg=str(svg_path), points=len(frame))
    return svg_path
