"""
Metrics Collection for perctrunc
Prometheus metrics for experiment observability
"""
import time
from functools import wraps

from prometheus_client import REGISTRY, Counter, Histogram, Info, write_to_textfile

# Application Info
app_info = Info('perctrunc_app', 'perctrunc toolkit info')
app_info.info({
    'version': '1.0.0',
    'name': 'perctrunc',
    'description': 'Truncation experiments for long-range percolation'
})

# Trial Metrics
trials_total = Counter(
    'perctrunc_trials_total',
    'Total number of Monte Carlo trials aggregated',
    ['experiment']
)

trial_successes_total = Counter(
    'perctrunc_trial_successes_total',
    'Total number of successful Monte Carlo trials',
    ['experiment']
)

experiment_duration_seconds = Histogram(
    'perctrunc_experiment_duration_seconds',
    'Wall time of a complete experiment',
    ['experiment']
)

# Parameter Search Metrics
parameter_searches_total = Counter(
    'perctrunc_parameter_searches_total',
    'Total number of construction parameter searches',
    ['kind', 'status']  # block/thm2/thm3, ok/unsatisfiable
)

# Coupling Metrics
coupling_checks_total = Counter(
    'perctrunc_coupling_checks_total',
    'Total number of coupling checks performed',
    ['check']
)

coupling_violations_total = Counter(
    'perctrunc_coupling_violations_total',
    'Total number of coupling checks that failed',
    ['check']
)


def track_experiment(experiment: str):
    """Decorator to time an experiment"""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                experiment_duration_seconds.labels(
                    experiment=experiment
                ).observe(time.perf_counter() - start_time)

        return wrapper
    return decorator


def record_trials(experiment: str, trials: int, successes: int):
    """Record aggregated trial counts"""
    trials_total.labels(experiment=experiment).inc(trials)
    trial_successes_total.labels(experiment=experiment).inc(successes)


def record_parameter_search(kind: str, status: str):
    """Record a parameter search outcome"""
    parameter_searches_total.labels(kind=kind, status=status).inc()


def record_coupling_check(check: str, checks: int, violations: int):
    """Record coupling check counts"""
    coupling_checks_total.labels(check=check).inc(checks)
    coupling_violations_total.labels(check=check).inc(violations)


def write_metrics(path: str):
    """Write all metrics in Prometheus text format"""
    write_to_textfile(path, REGISTRY)
