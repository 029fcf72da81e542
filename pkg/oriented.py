"""
Oriented long-range percolation

Vertices are (x, m) with x in Z^d and level m >= 0. The bond
<(x, m), (x + n e_i, m + 1)> is open with probability p_|n|, and the
truncated model keeps only 1 <= |n| <= K. Survival to infinity is
approximated by reaching level H.
"""
import logging
import time
from dataclasses import dataclass, field
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np

from errors import DomainError
from montecarlo import EstimateResult, build_estimate, counts_monotone, run_trials
from sampler import ConfigSeed, EdgeId, oriented_edge, oriented_words, uniform_words
from sequences import SequenceLike

logger = logging.getLogger(__name__)

# rows hashed per vectorised call
_CHUNK_ROWS = 1 << 20


@dataclass(frozen=True)
class OrientedVertex:
    x: Tuple[int, ...]
    m: int

    def __post_init__(self):
        if self.m < 0:
            raise DomainError(f"level must be nonnegative, got {self.m}")

    @property
    def d(self) -> int:
        return len(self.x)


def out_edges(v: OrientedVertex, K: int, d: int) -> List[EdgeId]:
    """The 2Kd bonds from v to level m + 1"""
    if K < 1 or d < 1:
        raise DomainError("K and d must be positive")
    if v.d != d:
        raise DomainError(f"vertex has dimension {v.d}, expected {d}")
    return [
        oriented_edge(v.x, v.m, axis, sign * n)
        for axis in range(d)
        for sign in (-1, 1)
        for n in range(1, K + 1)
    ]


@dataclass
class FrontierRun:
    """Result of a level-by-level expansion from the origin"""
    height: int
    depth: int  # last level with a nonempty frontier
    frontiers: List[np.ndarray] = field(default_factory=list)

    @property
    def reached(self) -> bool:
        return self.depth >= self.height


def _step_table(seq: SequenceLike, K: int) -> Tuple[np.ndarray, np.ndarray]:
    p = seq.values(K)
    steps = np.concatenate([-np.arange(K, 0, -1), np.arange(1, K + 1)]).astype(np.int64)
    probs = p[np.abs(steps) - 1]
    live = probs > 0.0
    return steps[live], probs[live]


def _open_targets(key: int, frontier: np.ndarray, m: int, axis: int,
                  steps: np.ndarray, probs: np.ndarray) -> np.ndarray:
    S = steps.shape[0]
    out = []
    per_chunk = max(1, _CHUNK_ROWS // max(S, 1))
    for start in range(0, frontier.shape[0], per_chunk):
        block = frontier[start:start + per_chunk]
        base = np.repeat(block, S, axis=0)
        st = np.tile(steps, block.shape[0])
        pr = np.tile(probs, block.shape[0])
        u = uniform_words(key, oriented_words(base, m, st, axis))
        hit = u < pr
        targets = base[hit]
        targets[:, axis] += st[hit]
        out.append(targets)
    return np.concatenate(out) if out else np.empty((0, frontier.shape[1]), dtype=np.int64)


def frontier_levels(cfg: ConfigSeed, seq: SequenceLike, K: int, height: int, d: int = 1,
                    window: Optional[Tuple[int, int]] = None, keep: bool = False,
                    origin: Optional[Sequence[int]] = None) -> FrontierRun:
    """
    Expand the set of vertices reachable from the origin one level at a time.

    With ``window=(lo, hi)`` (d = 1 only) vertices outside columns lo..hi are
    dropped; any path found is then a path of the unrestricted graph.
    """
    if K < 1 or d < 1:
        raise DomainError("K and d must be positive")
    if height < 0:
        raise DomainError("height must be nonnegative")
    if window is not None and d != 1:
        raise DomainError("column windows apply to d = 1 only")

    steps, probs = _step_table(seq, int(K))
    key = cfg.key
    start = np.zeros((1, d), dtype=np.int64) if origin is None else np.asarray(origin, dtype=np.int64).reshape(1, d)
    frontier = start
    run = FrontierRun(height=height, depth=0, frontiers=[frontier] if keep else [])

    for m in range(height):
        if steps.size == 0:
            break
        parts = [_open_targets(key, frontier, m, axis, steps, probs) for axis in range(d)]
        targets = np.concatenate(parts)
        if window is not None:
            col = targets[:, 0]
            targets = targets[(col >= window[0]) & (col <= window[1])]
        if targets.shape[0] == 0:
            break
        if d == 1:
            frontier = np.unique(targets[:, 0])[:, None]
        else:
            frontier = np.unique(targets, axis=0)
        run.depth = m + 1
        if keep:
            run.frontiers.append(frontier)
    return run


def reaches_level(cfg: ConfigSeed, seq: SequenceLike, K: int, H: int, d: int = 1) -> bool:
    """True iff an open oriented path joins (0, 0) to level H"""
    if H < 1:
        raise DomainError("height must be positive")
    return frontier_levels(cfg, seq, K, H, d).reached


def _survival_trial(seq: SequenceLike, Ks: Tuple[int, ...], H: int, d: int,
                    master_seed: int, trial: int) -> Tuple[bool, ...]:
    cfg = ConfigSeed(master_seed=master_seed, trial=trial)
    return tuple(reaches_level(cfg, seq, K, H, d) for K in Ks)


def _depth_trial(seq: SequenceLike, K: int, H: int, d: int, master_seed: int, trial: int) -> int:
    cfg = ConfigSeed(master_seed=master_seed, trial=trial)
    return frontier_levels(cfg, seq, K, H, d).depth


def survival_outcomes(seq: SequenceLike, Ks: Sequence[int], H: int, d: int, trials: int,
                      master_seed: int, workers: Optional[int] = None) -> Tuple[List[Tuple[bool, ...]], int]:
    """
    Per-trial survival for each K on shared configurations.

    Returns the outcome rows and the number of trials whose outcomes are
    not monotone in K (always zero under the shared-variate coupling).
    """
    Ks = tuple(int(k) for k in Ks)
    if list(Ks) != sorted(set(Ks)):
        raise DomainError("K values must be strictly increasing")
    rows = run_trials(partial(_survival_trial, seq, Ks, H, d, master_seed), trials, workers)
    violations = counts_monotone(rows)
    if violations:
        logger.error(f"{violations} trials violate K-monotonicity", extra={"violations": violations})
    return rows, violations


def survival_depths(seq: SequenceLike, K: int, H: int, d: int, trials: int,
                    master_seed: int, workers: Optional[int] = None) -> List[int]:
    """Deepest level reached per trial, capped at H"""
    return run_trials(partial(_depth_trial, seq, int(K), H, d, master_seed), trials, workers)


def estimate_survival(seq: SequenceLike, K: int, H: int, d: int, trials: int,
                      master_seed: int, workers: Optional[int] = None) -> EstimateResult:
    """Fraction of trials in which level H is reached"""
    if trials < 1:
        raise DomainError("trials must be positive")
    start = time.perf_counter()
    rows, _ = survival_outcomes(seq, [K], H, d, trials, master_seed, workers)
    successes = sum(1 for (hit,) in rows if hit)
    return build_estimate(successes, trials, master_seed, time.perf_counter() - start,
                          experiment="oriented")
