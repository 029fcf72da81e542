"""
Anisotropic long-range square lattice G^an

Vertical unit bonds are open with probability delta; the horizontal bond
between (x, y) and (x + n, y) is open with probability p_n (n <= K).
Also hosts the two nearest-neighbour / one-dimensional harnesses that the
constructions lean on: the Kesten box crossing and the Kalikow-Weiss
connection on the long-range line.
"""
import logging
import time
from functools import partial
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from connectivity import WindowGraph, component_labels
from errors import DomainError
from montecarlo import EstimateResult, build_estimate, counts_monotone, estimate_from_trials, run_trials
from sampler import (
    HORIZONTAL,
    VERTICAL,
    ConfigSeed,
    EdgeReader,
    aniso_words,
    line_words,
    uniform_words,
)
from sequences import ProbSequence, SequenceLike, TruncatedSequence, builtin

logger = logging.getLogger(__name__)


class AnisoParams(BaseModel):
    """delta for vertical bonds, (p_n) truncated at K for horizontal ones"""

    model_config = ConfigDict(frozen=True)

    delta: float = Field(..., ge=0.0, le=1.0, description="Vertical bond probability")
    seq: Union[ProbSequence, TruncatedSequence]
    K: int = Field(..., ge=1, description="Horizontal truncation range")

    def reader(self, cfg: ConfigSeed, record: bool = True) -> EdgeReader:
        return EdgeReader(cfg, self.seq, self.K, self.delta, record=record)


def window_components(cfg: ConfigSeed, params: AnisoParams, x0: int, x1: int, y0: int, y1: int) -> WindowGraph:
    """Connected components of the open subgraph induced on [x0,x1] x [y0,y1]"""
    if x1 < x0 or y1 < y0:
        raise DomainError("empty window")
    width, height = x1 - x0 + 1, y1 - y0 + 1
    key = cfg.key
    p = params.seq.values(params.K)

    xs = np.arange(x0, x1 + 1, dtype=np.int64)
    ys = np.arange(y0, y1 + 1, dtype=np.int64)
    src, dst = [], []

    for n in range(1, min(params.K, width - 1) + 1):
        if p[n - 1] <= 0.0:
            continue
        left = xs[: width - n]
        gx = np.tile(left, height)
        gy = np.repeat(ys, left.size)
        u = uniform_words(key, aniso_words(gx, gy, HORIZONTAL, n))
        hit = u < p[n - 1]
        a = (gy[hit] - y0) * width + (gx[hit] - x0)
        src.append(a)
        dst.append(a + n)

    if height > 1 and params.delta > 0.0:
        gx = np.tile(xs, height - 1)
        gy = np.repeat(ys[:-1], width)
        u = uniform_words(key, aniso_words(gx, gy, VERTICAL, 1))
        hit = u < params.delta
        a = (gy[hit] - y0) * width + (gx[hit] - x0)
        src.append(a)
        dst.append(a + width)

    src_arr = np.concatenate(src) if src else np.empty(0, dtype=np.int64)
    dst_arr = np.concatenate(dst) if dst else np.empty(0, dtype=np.int64)
    labels = component_labels(width * height, src_arr, dst_arr)
    return WindowGraph(x0, x1, y0, y1, labels)


# Kesten crossing

def crosses_box(cfg: ConfigSeed, pv: float, ph: float, n: int) -> bool:
    """Left-right open crossing of [0,n-1]^2 in nearest-neighbour bond percolation"""
    params = AnisoParams(delta=pv, seq=builtin("constant", p=ph), K=1)
    graph = window_components(cfg, params, 0, n - 1, 0, n - 1)
    labels = graph.labels.reshape(n, n)
    return bool(np.intersect1d(labels[:, 0], labels[:, -1]).size)


def _kesten_trial(pv: float, ph: float, n: int, master_seed: int, trial: int) -> bool:
    return crosses_box(ConfigSeed(master_seed=master_seed, trial=trial), pv, ph, n)


def kesten_crossing(pv: float, ph: float, n: int, trials: int, master_seed: int,
                    workers: Optional[int] = None) -> EstimateResult:
    """
    Left-right crossing probability of an n x n box.

    This is G^an truncated at K = 1 with p_1 = ph and delta = pv; on the
    critical curve pv + ph = 1 the phases meet.
    """
    if n < 2:
        raise DomainError("box side must be at least 2")
    for name, value in (("pv", pv), ("ph", ph)):
        if not 0.0 <= value <= 1.0:
            raise DomainError(f"{name} must lie in [0, 1]")
    return estimate_from_trials(partial(_kesten_trial, pv, ph, n, master_seed), trials, master_seed, workers,
                                experiment="kesten")


# Kalikow-Weiss connection on the long-range line

def line_open_edges(cfg: ConfigSeed, seq: SequenceLike, L: int) -> Tuple[np.ndarray, np.ndarray]:
    """Open bonds <i, j> with 0 <= i < j <= L, as (i, j) arrays"""
    key = cfg.key
    p = seq.values(L)
    src, dst = [], []
    for gap in range(1, L + 1):
        if p[gap - 1] <= 0.0:
            continue
        i = np.arange(0, L - gap + 1, dtype=np.int64)
        hit = uniform_words(key, line_words(i, gap)) < p[gap - 1]
        src.append(i[hit])
        dst.append(i[hit] + gap)
    if not src:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.concatenate(src), np.concatenate(dst)


def line_connected(src: np.ndarray, dst: np.ndarray, l: int, L: int) -> bool:
    """Are 0..l connected using open bonds inside 0..L?"""
    keep = dst <= L
    labels = component_labels(L + 1, src[keep], dst[keep])
    return bool(np.all(labels[: l + 1] == labels[0]))


def _kw_trial(seq: SequenceLike, l: int, Ls: Tuple[int, ...], master_seed: int, trial: int) -> Tuple[bool, ...]:
    cfg = ConfigSeed(master_seed=master_seed, trial=trial)
    src, dst = line_open_edges(cfg, seq, Ls[-1])
    return tuple(line_connected(src, dst, l, L) for L in Ls)


def kw_outcomes(seq: SequenceLike, l: int, Ls: Sequence[int], trials: int, master_seed: int,
                workers: Optional[int] = None) -> Tuple[List[Tuple[bool, ...]], int]:
    """
    Per-trial connection outcomes for nested windows 0..L.

    Windows share bonds, so outcomes are monotone in L trial by trial; the
    second return value counts trials where they are not.
    """
    Ls = tuple(int(L) for L in Ls)
    if list(Ls) != sorted(set(Ls)):
        raise DomainError("L values must be strictly increasing")
    if l < 1 or Ls[0] < l:
        raise DomainError("need L >= l >= 1")
    rows = run_trials(partial(_kw_trial, seq, l, Ls, master_seed), trials, workers)
    return rows, counts_monotone(rows)


def kw_connect_prob(seq: SequenceLike, l: int, L: int, trials: int, master_seed: int,
                    workers: Optional[int] = None) -> EstimateResult:
    """Probability that 0..l are connected within 0..L on the long-range line"""
    start = time.perf_counter()
    rows, _ = kw_outcomes(seq, l, [L], trials, master_seed, workers)
    return build_estimate(sum(1 for (hit,) in rows if hit), trials, master_seed,
                          time.perf_counter() - start, experiment="kw")
