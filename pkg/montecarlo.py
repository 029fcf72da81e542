"""
Monte Carlo plumbing for perctrunc

Trials are keyed by their index, so a trial's outcome does not depend on
which worker ran it or in which order. Aggregation only counts.
"""
import logging
import math
import time
from multiprocessing import Pool
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

from pydantic import BaseModel, Field, model_validator
from scipy.stats import norm

from config import get_settings
from errors import DomainError
from logging_config import log_estimate
from metrics import record_trials
from sampler import ENCODING_VERSION, GENERATOR

logger = logging.getLogger(__name__)

T = TypeVar("T")


class EstimateResult(BaseModel):
    """Point estimate of a probability with a Wilson score interval"""
    estimate: float = Field(..., ge=0.0, le=1.0)
    trials: int = Field(..., ge=1)
    successes: int = Field(..., ge=0)
    ci_low: float = Field(..., ge=0.0, le=1.0)
    ci_high: float = Field(..., ge=0.0, le=1.0)
    confidence: float = 0.95
    master_seed: int
    generator: str = GENERATOR
    encoding_version: int = ENCODING_VERSION
    wall_time: float = Field(0.0, description="Seconds; excluded from reproducible payloads")

    @model_validator(mode="after")
    def _check_counts(self):
        if self.successes > self.trials:
            raise ValueError("successes cannot exceed trials")
        if not self.ci_low <= self.estimate <= self.ci_high:
            raise ValueError("interval must contain the point estimate")
        return self

    @property
    def sigma(self) -> float:
        """Binomial standard error at the point estimate"""
        return math.sqrt(self.estimate * (1.0 - self.estimate) / self.trials)

    def payload(self) -> dict:
        """Reproducible fields only"""
        return self.model_dump(exclude={"wall_time"})


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion"""
    if trials < 1:
        raise DomainError("trials must be positive")
    if not 0 <= successes <= trials:
        raise DomainError("successes must lie in [0, trials]")

    z = float(norm.ppf(1.0 - (1.0 - confidence) / 2.0))
    p = successes / trials
    z2n = z * z / trials
    denom = 1.0 + z2n
    center = (p + z2n / 2.0) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z2n / (4.0 * trials)) / denom

    lo = max(0.0, min(center - half, p))
    hi = min(1.0, max(center + half, p))
    if successes == 0:
        lo = 0.0
    if successes == trials:
        hi = 1.0
    return lo, hi


def build_estimate(successes: int, trials: int, master_seed: int, wall_time: float = 0.0,
                   confidence: Optional[float] = None, experiment: Optional[str] = None) -> EstimateResult:
    confidence = confidence or get_settings().confidence
    lo, hi = wilson_interval(successes, trials, confidence)
    result = EstimateResult(
        estimate=successes / trials,
        trials=trials,
        successes=successes,
        ci_low=lo,
        ci_high=hi,
        confidence=confidence,
        master_seed=master_seed,
        wall_time=wall_time,
    )
    if experiment:
        record_trials(experiment, trials, successes)
        log_estimate(experiment, successes, trials, result.estimate, (lo, hi))
    return result


def resolve_workers(workers: Optional[int], trials: int) -> int:
    if workers is None:
        workers = get_settings().threads
    if workers < 1:
        raise DomainError("workers must be positive")
    return max(1, min(workers, trials))


def run_trials(fn: Callable[[int], T], trials: int, workers: Optional[int] = None) -> List[T]:
    """
    Evaluate fn(0), .., fn(trials - 1), in order.

    fn must be picklable (a module-level function or a functools.partial of
    one) when more than one worker is used.
    """
    if trials < 1:
        raise DomainError("trials must be positive")
    workers = resolve_workers(workers, trials)

    if workers == 1:
        return [fn(t) for t in range(trials)]

    chunksize = max(1, trials // (workers * 8))
    logger.debug(f"Fanning out {trials} trials over {workers} workers")
    with Pool(processes=workers) as pool:
        return pool.map(fn, range(trials), chunksize=chunksize)


def estimate_from_trials(fn: Callable[[int], bool], trials: int, master_seed: int,
                         workers: Optional[int] = None, experiment: Optional[str] = None) -> EstimateResult:
    """Run boolean trials and wrap the success count"""
    start = time.perf_counter()
    outcomes = run_trials(fn, trials, workers)
    successes = int(sum(bool(o) for o in outcomes))
    return build_estimate(successes, trials, master_seed, time.perf_counter() - start,
                          experiment=experiment)


def within_sigmas(frequency: float, p: float, n: int, sigmas: float = 4.0) -> bool:
    """|frequency - p| <= sigmas * sqrt(p(1-p)/n)"""
    return abs(frequency - p) <= sigmas * math.sqrt(p * (1.0 - p) / n) + 1e-12


def counts_monotone(rows: Sequence[Sequence[bool]]) -> int:
    """Number of rows that are not non-decreasing (False before True allowed)"""
    return sum(1 for row in rows if any(a and not b for a, b in zip(row, row[1:])))
