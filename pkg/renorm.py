"""
Block renormalization for the oriented model (d = 1)

Block events live on the oriented graph and certify local connections:

    R±(x, m, i)  <(x,m),(x±i,m+1)> and <(x±i,m+1),(x,m+2)> open
    S±(x, m)     some R±(x, m, i) with k < i <= K
    L(x, m)      <(x,m),(x+k,m+1)> and <(x+k,m+1),(x+2k,m+2)> open
    T±(x, m)     S± at (x, m+2i) and (x+2k, m+2i) for i = 0..M, and
                 L at some (x, m+2i), i < M

A renormalized vertex (v, u) of the wedge v <= u is accepted when
T+ (v even) or T- (v odd) holds at (2kv, 2(M+1)u). The exploration visits
the wedge in (u, v) order, touching a fresh set of bonds at every step.
"""
import heapq
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config import get_settings
from errors import DomainError, InvariantViolation, UnsatisfiableParameters
from logging_config import log_coupling_report, log_parameter_choice
from metrics import record_coupling_check, record_parameter_search
from montecarlo import EstimateResult, build_estimate, estimate_from_trials, run_trials
from oriented import frontier_levels
from sampler import ConfigSeed, EdgeId, EdgeReader, oriented_edge, oriented_words, uniform_words
from sequences import SequenceLike

logger = logging.getLogger(__name__)


class BlockParams(BaseModel):
    """Construction parameters (eps, k, M, K)"""

    model_config = ConfigDict(frozen=True)

    epsilon: Optional[float] = Field(None, gt=0.0, lt=1.0)
    k: int = Field(..., ge=1, description="Smallest bond length with p_k > 0")
    M: int = Field(..., ge=1, description="Height of the S ladder")
    K: int = Field(..., ge=2, description="Largest bond length used by the events")
    minimal: bool = Field(False, description="M and K were verified minimal")


class EventKind(str, Enum):
    R = "R"
    S = "S"
    L = "L"
    T = "T"


class Sign(str, Enum):
    PLUS = "+"
    MINUS = "-"

    @property
    def factor(self) -> int:
        return 1 if self is Sign.PLUS else -1


def _minimal_power(q: float, target: float) -> int:
    """Smallest M >= 1 with q**M < target"""
    if q <= 0.0:
        return 1
    if q >= 1.0:
        raise UnsatisfiableParameters("p_k is zero; no M satisfies the ladder inequality")
    M = max(1, int(math.floor(math.log(target) / math.log(q))) + 1)
    while M > 1 and q ** (M - 1) < target:
        M -= 1
    while not q**M < target:
        M += 1
    return M


def choose_block_params(seq: SequenceLike, epsilon: float, horizon: Optional[int] = None) -> BlockParams:
    """
    Minimal M with (1 - p_k^2)^M < eps/3, then minimal K with
    1 - exp(-sum_{k<i<=K} p_i^2) >= (1 - eps/3)^(1/(M+1)).
    """
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    horizon = horizon or get_settings().default_horizon

    v = seq.values(horizon)
    support = np.flatnonzero(v > 0.0)
    if not support.size:
        record_parameter_search("block", "unsatisfiable")
        raise UnsatisfiableParameters(f"sequence has empty support within horizon {horizon}")
    k = int(support[0]) + 1

    target = epsilon / 3.0
    q = 1.0 - v[k - 1] ** 2
    M = _minimal_power(q, target)

    threshold = (1.0 - target) ** (1.0 / (M + 1))
    partial_sums = np.cumsum(v[k:] ** 2)
    ok = (1.0 - np.exp(-partial_sums)) >= threshold
    if not ok.any():
        record_parameter_search("block", "unsatisfiable")
        raise UnsatisfiableParameters(
            f"1 - exp(-sum p_i^2) stays below {threshold:.6f} up to horizon {horizon}; "
            "the square sum is too small"
        )
    j = int(np.argmax(ok))
    K = k + 1 + j

    if not q**M < target or (M > 1 and q ** (M - 1) < target):
        raise InvariantViolation(f"M={M} is not minimal")
    if j > 0 and ok[j - 1]:
        raise InvariantViolation(f"K={K} is not minimal")

    bp = BlockParams(epsilon=epsilon, k=k, M=M, K=K, minimal=True)
    record_parameter_search("block", "ok")
    log_parameter_choice("block", {"epsilon": epsilon, "k": k, "M": M, "K": K})
    return bp


def prob_L(seq: SequenceLike, horizon: Optional[int] = None) -> float:
    """P(L) = p_k^2"""
    horizon = horizon or get_settings().default_horizon
    v = seq.values(horizon)
    support = np.flatnonzero(v > 0.0)
    if not support.size:
        raise UnsatisfiableParameters("sequence has empty support")
    return float(v[support[0]] ** 2)


def prob_S_exact(seq: SequenceLike, k: int, K: int) -> float:
    """P(S) = 1 - prod_{k<i<=K} (1 - p_i^2)"""
    if K <= k:
        raise DomainError(f"need K > k, got k={k}, K={K}")
    v = seq.values(K)[k:K]
    return float(1.0 - np.prod(1.0 - v * v))


def prob_T_exact(seq: SequenceLike, bp: BlockParams) -> float:
    """P(T) = P(S)^(2(M+1)) * (1 - (1 - p_k^2)^M)"""
    s = prob_S_exact(seq, bp.k, bp.K)
    pk = seq.eval(bp.k)
    value = s ** (2 * (bp.M + 1)) * (1.0 - (1.0 - pk * pk) ** bp.M)

    if bp.minimal and bp.epsilon is not None:
        floor = (1.0 - bp.epsilon / 3.0) ** 3
        if value < floor - 1e-12 or floor < 1.0 - bp.epsilon:
            raise InvariantViolation(f"P(T)={value} breaks the chain P(T) >= {floor} >= 1 - eps")
    return float(value)


# Event evaluation

def _edge(x: int, m: int, step: int) -> EdgeId:
    return oriented_edge(x, m, 0, step)


def _R_edges(x: int, m: int, i: int, s: int) -> Tuple[EdgeId, EdgeId]:
    return _edge(x, m, s * i), _edge(x + s * i, m + 1, -s * i)


def _L_edges(x: int, m: int, k: int) -> Tuple[EdgeId, EdgeId]:
    return _edge(x, m, k), _edge(x + k, m + 1, k)


def _eval_R(reader: EdgeReader, x: int, m: int, i: int, s: int) -> bool:
    a, b = _R_edges(x, m, i, s)
    return reader.is_open(a) and reader.is_open(b)


def _eval_S(reader: EdgeReader, x: int, m: int, bp: BlockParams, s: int) -> bool:
    return any(_eval_R(reader, x, m, i, s) for i in range(bp.k + 1, bp.K + 1))


def _eval_L(reader: EdgeReader, x: int, m: int, k: int) -> bool:
    a, b = _L_edges(x, m, k)
    return reader.is_open(a) and reader.is_open(b)


def _eval_T(reader: EdgeReader, x: int, m: int, bp: BlockParams, s: int) -> bool:
    for column in (x, x + 2 * bp.k):
        if not all(_eval_S(reader, column, m + 2 * i, bp, s) for i in range(bp.M + 1)):
            return False
    return any(_eval_L(reader, x, m + 2 * i, bp.k) for i in range(bp.M))


def eval_event(cfg: ConfigSeed, seq: SequenceLike, K_trunc: int, kind: EventKind, x: int, m: int,
               bp: BlockParams, sign: Sign = Sign.PLUS, i: Optional[int] = None) -> Tuple[bool, FrozenSet[EdgeId]]:
    """Evaluate a block event lazily; returns (occurred, edges read)"""
    if K_trunc < bp.K:
        raise DomainError(f"truncation {K_trunc} is below the block range K={bp.K}")
    if m < 0:
        raise DomainError("level must be nonnegative")
    kind, sign = EventKind(kind), Sign(sign)
    reader = EdgeReader(cfg, seq, K_trunc)
    s = sign.factor

    if kind == EventKind.R:
        if i is None or i < 1:
            raise DomainError("R events need a positive length i")
        ok = _eval_R(reader, x, m, i, s)
    elif kind == EventKind.S:
        ok = _eval_S(reader, x, m, bp, s)
    elif kind == EventKind.L:
        ok = _eval_L(reader, x, m, bp.k)
    else:
        ok = _eval_T(reader, x, m, bp, s)
    return ok, frozenset(reader.footprint)


def nominal_footprint(kind: EventKind, x: int, m: int, bp: BlockParams, sign: Sign = Sign.PLUS,
                      i: Optional[int] = None) -> Set[EdgeId]:
    """Every bond the event may read, independent of evaluation order"""
    kind, s = EventKind(kind), Sign(sign).factor
    if kind == EventKind.R:
        return set(_R_edges(x, m, i, s))
    if kind == EventKind.L:
        return set(_L_edges(x, m, bp.k))
    if kind == EventKind.S:
        return {e for j in range(bp.k + 1, bp.K + 1) for e in _R_edges(x, m, j, s)}
    out: Set[EdgeId] = set()
    for column in (x, x + 2 * bp.k):
        for r in range(bp.M + 1):
            out |= nominal_footprint(EventKind.S, column, m + 2 * r, bp, sign)
    for r in range(bp.M):
        out |= set(_L_edges(x, m + 2 * r, bp.k))
    return out


def eval_T_batch(cfg: ConfigSeed, seq: SequenceLike, bp: BlockParams, xs: np.ndarray, ms: np.ndarray,
                 signs: np.ndarray) -> np.ndarray:
    """
    Vectorised T evaluation for many anchors at once.

    ``signs`` holds +1 / -1 per anchor. Agrees with the lazy evaluator on
    every anchor; it simply reads the full nominal footprint.
    """
    xs = np.asarray(xs, dtype=np.int64)
    ms = np.asarray(ms, dtype=np.int64)
    signs = np.asarray(signs, dtype=np.int64)
    A = xs.shape[0]
    if A == 0:
        return np.zeros(0, dtype=bool)
    key = cfg.key
    k, M, K = bp.k, bp.M, bp.K
    p = seq.values(K)

    i = np.arange(k + 1, K + 1, dtype=np.int64)
    cols = np.array([0, 2 * k], dtype=np.int64)
    rows = 2 * np.arange(M + 1, dtype=np.int64)
    shape = (A, 2, M + 1, i.size)
    base_x = np.broadcast_to(xs[:, None, None, None] + cols[None, :, None, None], shape)
    base_m = np.broadcast_to(ms[:, None, None, None] + rows[None, None, :, None], shape)
    step = np.broadcast_to(signs[:, None, None, None] * i[None, None, None, :], shape)
    pi = p[i - 1][None, None, None, :]

    u1 = uniform_words(key, oriented_words(base_x.ravel(), base_m.ravel(), step.ravel())).reshape(base_x.shape)
    u2 = uniform_words(key, oriented_words((base_x + step).ravel(), (base_m + 1).ravel(), (-step).ravel())).reshape(base_x.shape)
    s_ok = ((u1 < pi) & (u2 < pi)).any(axis=3).all(axis=(1, 2))

    pk = p[k - 1]
    lrows = 2 * np.arange(M, dtype=np.int64)
    lx = np.repeat(xs, M)
    lm = (ms[:, None] + lrows[None, :]).ravel()
    v1 = uniform_words(key, oriented_words(lx, lm, np.full(lx.shape, k)))
    v2 = uniform_words(key, oriented_words(lx + k, lm + 1, np.full(lx.shape, k)))
    l_ok = ((v1 < pk) & (v2 < pk)).reshape(A, M).any(axis=1)
    return s_ok & l_ok


# Renormalized wedge

@dataclass(frozen=True)
class RenormVertex:
    v: int
    u: int

    def __post_init__(self):
        if not 0 <= self.v <= self.u:
            raise DomainError(f"({self.v}, {self.u}) is outside the wedge 0 <= v <= u")

    @property
    def order_key(self) -> Tuple[int, int]:
        return (self.u, self.v)

    def children(self) -> Tuple["RenormVertex", "RenormVertex"]:
        return RenormVertex(self.v, self.u + 1), RenormVertex(self.v + 1, self.u + 1)


def exterior_boundary(A: Iterable[RenormVertex]) -> Set[RenormVertex]:
    """{(v,u) not in A : (v-1,u-1) in A or (v,u-1) in A}"""
    A = set(A)
    return {c for a in A for c in a.children() if c not in A}


def next_vertex(A: Iterable[RenormVertex], B: Iterable[RenormVertex]) -> Optional[RenormVertex]:
    """The order-minimal vertex of the exterior boundary of A outside B"""
    candidates = exterior_boundary(A) - set(B)
    if not candidates:
        return None
    return min(candidates, key=lambda w: w.order_key)


@dataclass
class VisitRecord:
    vertex: RenormVertex
    accepted: bool
    sign: Sign
    footprint: FrozenSet[EdgeId] = frozenset()


@dataclass
class ExplorationState:
    cfg: ConfigSeed
    bp: BlockParams
    K_trunc: int
    recorded: bool
    A: Set[RenormVertex] = field(default_factory=set)
    B: Set[RenormVertex] = field(default_factory=set)
    visits: List[VisitRecord] = field(default_factory=list)
    alive: bool = True

    @property
    def steps(self) -> int:
        return len(self.visits)


def block_anchor(w: RenormVertex, bp: BlockParams) -> Tuple[int, int, Sign]:
    sign = Sign.PLUS if w.v % 2 == 0 else Sign.MINUS
    return 2 * bp.k * w.v, 2 * (bp.M + 1) * w.u, sign


def explore(cfg: ConfigSeed, seq: SequenceLike, bp: BlockParams, max_steps: int,
            K_trunc: Optional[int] = None, record_footprints: bool = True) -> ExplorationState:
    """
    Run the exploration from (0, 0) for at most max_steps visits.

    With record_footprints the T events are evaluated lazily and the bonds
    each step read are kept; otherwise whole wedge rows are evaluated in one
    vectorised pass.
    """
    if max_steps < 1:
        raise DomainError("max_steps must be positive")
    K_trunc = bp.K if K_trunc is None else K_trunc
    if K_trunc < bp.K:
        raise DomainError(f"truncation {K_trunc} is below the block range K={bp.K}")

    state = ExplorationState(cfg=cfg, bp=bp, K_trunc=K_trunc, recorded=record_footprints)
    reader = EdgeReader(cfg, seq, K_trunc)
    row_cache: Dict[int, np.ndarray] = {}
    heap: List[Tuple[int, int]] = [(0, 0)]
    queued = {(0, 0)}

    while heap and state.steps < max_steps:
        u, v = heapq.heappop(heap)
        w = RenormVertex(v, u)
        x, m, sign = block_anchor(w, bp)

        if record_footprints:
            accepted = _eval_T(reader, x, m, bp, sign.factor)
            footprint = frozenset(reader.take_footprint())
        else:
            if u not in row_cache:
                vs = np.arange(u + 1)
                row_cache[u] = eval_T_batch(cfg, seq, bp, 2 * bp.k * vs, np.full(u + 1, m),
                                            np.where(vs % 2 == 0, 1, -1))
            accepted = bool(row_cache[u][v])
            footprint = frozenset()

        state.visits.append(VisitRecord(w, accepted, sign, footprint))
        if accepted:
            state.A.add(w)
            for c in w.children():
                if (c.u, c.v) not in queued:
                    queued.add((c.u, c.v))
                    heapq.heappush(heap, (c.u, c.v))
        else:
            state.B.add(w)

    state.alive = bool(heap)
    return state


class CouplingReport(BaseModel):
    """Tallies from replaying an exploration against the configuration"""
    runs: int = 1
    steps: int = 0
    footprint_edges: int = 0
    footprint_overlaps: int = 0
    nominal_overlaps: int = 0
    order_checks: int = 0
    order_violations: int = 0
    path_checks: int = 0
    path_violations: int = 0

    @property
    def violations(self) -> int:
        return self.footprint_overlaps + self.nominal_overlaps + self.order_violations + self.path_violations

    def merge(self, other: "CouplingReport") -> "CouplingReport":
        data = {name: getattr(self, name) + getattr(other, name) for name in self.model_fields}
        return CouplingReport(**data)


def _count_overlaps(sets: Iterable[Iterable[EdgeId]]) -> Tuple[int, int]:
    seen: Set[EdgeId] = set()
    total = overlaps = 0
    for edges in sets:
        for e in edges:
            total += 1
            if e in seen:
                overlaps += 1
            seen.add(e)
    return total, overlaps


def verify_coupling(state: ExplorationState, cfg: ConfigSeed, seq: SequenceLike, bp: BlockParams) -> CouplingReport:
    """
    Replay an exploration: footprints pairwise disjoint, visit order as
    defined, and for every accepted (v, u) open paths from the origin to
    (2kv, 2(M+1)(u+1)) and (2k(v+1), 2(M+1)(u+1)).
    """
    if state.cfg != cfg or state.bp != bp:
        raise DomainError("exploration state was produced with a different configuration or parameters")
    if not state.recorded:
        raise DomainError("coupling verification needs an exploration run with record_footprints=True")

    total, overlaps = _count_overlaps(rec.footprint for rec in state.visits)
    _, nominal = _count_overlaps(
        nominal_footprint(EventKind.T, *block_anchor(rec.vertex, bp)[:2], bp, rec.sign) for rec in state.visits
    )

    order_checks = order_violations = 0
    A: Set[RenormVertex] = set()
    B: Set[RenormVertex] = set()
    for n, rec in enumerate(state.visits):
        expected = RenormVertex(0, 0) if n == 0 else next_vertex(A, B)
        order_checks += 1
        if rec.vertex != expected:
            order_violations += 1
        (A if rec.accepted else B).add(rec.vertex)
    if A != state.A or B != state.B:
        order_violations += 1

    path_checks = path_violations = 0
    if state.A:
        umax = max(w.u for w in state.A)
        vmax = max(w.v for w in state.A)
        height = 2 * (bp.M + 1) * (umax + 1)
        window = (-state.K_trunc, 2 * bp.k * (vmax + 1) + state.K_trunc)
        run = frontier_levels(cfg, seq, state.K_trunc, height, 1, window=window, keep=True)
        reached = [set(f[:, 0].tolist()) for f in run.frontiers]
        for w in state.A:
            level = 2 * (bp.M + 1) * (w.u + 1)
            for column in (2 * bp.k * w.v, 2 * bp.k * (w.v + 1)):
                path_checks += 1
                if level >= len(reached) or column not in reached[level]:
                    path_violations += 1

    return CouplingReport(
        steps=state.steps,
        footprint_edges=total,
        footprint_overlaps=overlaps,
        nominal_overlaps=nominal,
        order_checks=order_checks,
        order_violations=order_violations,
        path_checks=path_checks,
        path_violations=path_violations,
    )


def _verify_trial(seq: SequenceLike, bp: BlockParams, max_steps: int, master_seed: int, trial: int) -> CouplingReport:
    cfg = ConfigSeed(master_seed=master_seed, trial=trial)
    state = explore(cfg, seq, bp, max_steps, record_footprints=True)
    return verify_coupling(state, cfg, seq, bp)


def verify_exploration_runs(seq: SequenceLike, bp: BlockParams, runs: int, max_steps: int,
                            master_seed: int, workers: Optional[int] = None) -> CouplingReport:
    """Aggregate coupling reports over independent exploration runs"""
    reports = run_trials(partial(_verify_trial, seq, bp, max_steps, master_seed), runs, workers)
    total = CouplingReport(runs=0)
    for r in reports:
        total = total.merge(r)
    record_coupling_check("exploration_paths", total.path_checks, total.path_violations)
    record_coupling_check("exploration_footprints", total.footprint_edges,
                          total.footprint_overlaps + total.nominal_overlaps)
    log_coupling_report("exploration", total.order_checks + total.path_checks, total.violations)
    return total


# Survival of the exploration

class ExplorationSurvival(BaseModel):
    estimate: EstimateResult
    max_steps: int
    one_minus_epsilon: float
    prob_T: float
    reference_threshold: float = Field(..., description="Empirical oriented site threshold")
    block_params: BlockParams


def _survival_trial(seq: SequenceLike, bp: BlockParams, max_steps: int, master_seed: int, trial: int) -> bool:
    cfg = ConfigSeed(master_seed=master_seed, trial=trial)
    return explore(cfg, seq, bp, max_steps, record_footprints=False).alive


def estimate_exploration_survival(seq: SequenceLike, epsilon: float, trials: int, max_steps: int,
                                  master_seed: int, horizon: Optional[int] = None,
                                  workers: Optional[int] = None) -> ExplorationSurvival:
    """Fraction of explorations whose frontier is nonempty after max_steps visits"""
    bp = choose_block_params(seq, epsilon, horizon)
    start = time.perf_counter()
    outcomes = run_trials(partial(_survival_trial, seq, bp, max_steps, master_seed), trials, workers)
    estimate = build_estimate(sum(outcomes), trials, master_seed, time.perf_counter() - start,
                              experiment="exploration")
    return ExplorationSurvival(
        estimate=estimate,
        max_steps=max_steps,
        one_minus_epsilon=1.0 - epsilon,
        prob_T=prob_T_exact(seq, bp),
        reference_threshold=get_settings().oriented_site_threshold,
        block_params=bp,
    )


# Plain oriented site percolation on the wedge

def _site_rng(master_seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([master_seed, trial])))


def site_survival(gamma: float, height: int, master_seed: int, trial: int) -> bool:
    """Does an open site path run from (0,0) to row `height` (successors (v,u+1), (v+1,u+1))?"""
    if not 0.0 <= gamma <= 1.0:
        raise DomainError("gamma must lie in [0, 1]")
    rng = _site_rng(master_seed, trial)
    reach = rng.random(1) < gamma
    for u in range(1, height + 1):
        if not reach.any():
            return False
        grown = np.zeros(u + 1, dtype=bool)
        grown[:u] |= reach
        grown[1:] |= reach
        reach = grown & (rng.random(u + 1) < gamma)
    return bool(reach.any())


def estimate_site_survival(gamma: float, height: int, trials: int, master_seed: int,
                           workers: Optional[int] = None) -> EstimateResult:
    return estimate_from_trials(partial(site_survival, gamma, height, master_seed), trials, master_seed, workers,
                                experiment="site")


# survival exponent of 1+1 dimensional directed percolation
DP_SURVIVAL_EXPONENT = 0.1595


class SiteThresholdEstimate(BaseModel):
    threshold: float
    gammas: List[float]
    heights: Tuple[int, int]
    survival_short: List[float]
    survival_long: List[float]
    trials: int
    master_seed: int


def estimate_site_threshold(gammas: Sequence[float], height: int, trials: int, master_seed: int) -> SiteThresholdEstimate:
    """
    Locate the oriented site threshold from survival to height/2 and height.

    All gammas share the same uniforms, so the curves are coupled. At the
    threshold P(h/2)/P(h) is close to 2**delta with the survival exponent
    delta; the estimate is where log2 of that ratio first drops below delta.
    """
    gammas = np.asarray(sorted(gammas), dtype=np.float64)
    if gammas.size < 2:
        raise DomainError("need at least two gamma values")
    if height < 4:
        raise DomainError("height must be at least 4")
    short = height // 2
    rng = _site_rng(master_seed, 0)

    reach = rng.random((trials, 1))[None, :, :] < gammas[:, None, None]
    alive_short = None
    for u in range(1, height + 1):
        grown = np.zeros((gammas.size, trials, u + 1), dtype=bool)
        grown[:, :, :u] |= reach
        grown[:, :, 1:] |= reach
        reach = grown & (rng.random((trials, u + 1))[None, :, :] < gammas[:, None, None])
        if u == short:
            alive_short = reach.any(axis=2).mean(axis=1)
    alive_long = reach.any(axis=2).mean(axis=1)

    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(alive_long > 0, np.log2(alive_short / alive_long), np.inf)
    below = np.flatnonzero(slope <= DP_SURVIVAL_EXPONENT)
    if not below.size:
        threshold = float(gammas[-1])
    elif below[0] == 0:
        threshold = float(gammas[0])
    else:
        j = below[0]
        s0, s1 = slope[j - 1], slope[j]
        if np.isfinite(s0):
            frac = (s0 - DP_SURVIVAL_EXPONENT) / (s0 - s1)
        else:
            frac = 1.0
        threshold = float(gammas[j - 1] + frac * (gammas[j] - gammas[j - 1]))

    logger.info(f"Site threshold estimate {threshold:.4f} from heights {short}/{height}",
                extra={"threshold": threshold, "trials": trials})
    return SiteThresholdEstimate(
        threshold=threshold,
        gammas=gammas.tolist(),
        heights=(short, height),
        survival_short=alive_short.tolist(),
        survival_long=alive_long.tolist(),
        trials=trials,
        master_seed=master_seed,
    )
