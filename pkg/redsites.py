"""
Red sites: oriented site percolation on the quadrant inside G^an

A site (v1, v2) is red when the event T holds at (k(v1 - v2), 2(v1 + v2)).
T at x joins the segment x + {0..2l} x {0} inside its window of width W
(event A) and sends a path up two rows into the segment of each successor:
R+ from the left half lands k columns to the right, R- from the right half
k columns to the left.

    R+ at x   <x, x+(0,1)> and <x+(k,1), x+(k,2)> open, and for some n <= M
              <x+(0,1), x+(n+k,1)> and <x+(n+k,1), x+(k,1)> open
    R- at x   <x, x+(0,1)> and <x+(-k,1), x+(-k,2)> open, and for some n <= M
              <x+(0,1), x+(n,1)> and <x+(n,1), x+(-k,1)> open
"""
import logging
import math
import time
from functools import partial
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from aniso import AnisoParams, kw_connect_prob, window_components
from config import get_settings
from errors import DomainError, InvariantViolation, UnsatisfiableParameters
from logging_config import log_coupling_report, log_parameter_choice
from metrics import record_coupling_check, record_parameter_search
from montecarlo import EstimateResult, build_estimate, estimate_from_trials, run_trials
from renorm import Sign
from sampler import ConfigSeed, EdgeId, EdgeReader, horizontal_edge, vertical_edge
from sequences import SequenceLike, probe_eta, support_gcd

logger = logging.getLogger(__name__)

Site = Tuple[int, int]


class Thm3Params(BaseModel):
    """Construction parameters (eta, l, W, k, M) with K = k + M"""

    model_config = ConfigDict(frozen=True)

    delta: float = Field(..., gt=0.0, le=1.0)
    eta: float = Field(..., gt=0.0)
    epsilon: float = Field(..., gt=0.0, lt=1.0)
    threshold: float = Field(..., gt=0.0, lt=1.0, description="Right side of the ell inequality")
    ell: int = Field(..., ge=1)
    W: int = Field(..., ge=3, description="Window width for the A event")
    k: int = Field(..., ge=1, description="Horizontal shift between successor blocks")
    M: int = Field(..., ge=1)
    K: int = Field(..., ge=2)
    eta_probed: bool = False
    minimal: bool = False


def choose_ell(delta: float, eta: float, threshold: float) -> int:
    """Smallest l with 1 - (1 - delta^2 (1 - e^-eta))^l > threshold"""
    if not 0.0 < delta <= 1.0:
        raise DomainError(f"delta must lie in (0, 1], got {delta}")
    if eta <= 0.0:
        raise DomainError("eta must be positive")
    if not 0.0 < threshold < 1.0:
        raise DomainError("threshold must lie in (0, 1)")
    q = 1.0 - delta * delta * (1.0 - math.exp(-eta))
    target = 1.0 - threshold
    if q <= 0.0 or q < target:
        return 1
    ell = max(1, int(math.floor(math.log(target) / math.log(q))) + 1)
    while ell > 1 and q ** (ell - 1) < target:
        ell -= 1
    while not q**ell < target:
        ell += 1
    return ell


def choose_shift_and_range(seq: SequenceLike, eta: float, W: int, horizon: Optional[int] = None,
                           max_shift: int = 1000) -> Tuple[int, int]:
    """
    Smallest k > 2W for which some M <= horizon has
    sum_{n<=M} p_n p_{n+k} > eta, and the smallest such M.
    """
    if eta <= 0.0:
        raise DomainError("eta must be positive")
    horizon = horizon or get_settings().default_horizon
    k_lo = 2 * W + 1
    k_hi = k_lo + max_shift

    v = seq.values(k_hi + horizon)
    support = np.flatnonzero(v > 0.0)
    last = int(support[-1]) if support.size else -1
    head = v[:horizon]

    for k in range(k_lo, k_hi + 1):
        if k > last:
            break
        ok = np.cumsum(head * v[k:k + horizon]) > eta
        if ok.any():
            return k, int(np.argmax(ok)) + 1
    raise UnsatisfiableParameters(f"no shift k in ({2 * W}, {k_hi}] has cross sum above eta={eta} "
                                  f"within horizon {horizon}")


def calibrate_window(seq: SequenceLike, ell: int, target: float, trials: int, master_seed: int,
                     workers: Optional[int] = None, max_doublings: int = 10) -> Tuple[int, EstimateResult]:
    """
    Smallest W on the ladder 2l+1, 2(2l+1), ... whose connection estimate
    for 0..2l inside 0..W has its lower confidence bound above target.
    """
    W = 2 * ell + 1
    for _ in range(max_doublings + 1):
        estimate = kw_connect_prob(seq, 2 * ell, W, trials, master_seed, workers)
        logger.debug(f"Window {W}: connection estimate {estimate.estimate:.4f}",
                     extra={"window": W, "ci_low": estimate.ci_low})
        if estimate.ci_low > target:
            return W, estimate
        W *= 2
    raise UnsatisfiableParameters(f"no window up to {W // 2} reaches connection probability {target}")


def choose_thm3_params(seq: SequenceLike, delta: float, epsilon: float, window: Optional[int] = None,
                       horizon: Optional[int] = None, eta: Optional[float] = None,
                       threshold: Optional[float] = None, max_shift: int = 64, trials: int = 2000,
                       master_seed: int = 0, workers: Optional[int] = None) -> Thm3Params:
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not 0.0 < delta <= 1.0:
        raise DomainError(f"delta must lie in (0, 1], got {delta}")
    horizon = horizon or get_settings().default_horizon

    gcd = support_gcd(seq, horizon)
    if gcd != 1:
        raise DomainError(f"support gcd is {gcd}; this construction needs gcd 1 "
                          "(for gcd d > 1 rerun it on the vertex set dZ x Z)")

    probed = eta is None
    if probed:
        eta = probe_eta(seq, max_shift, horizon)
        if eta <= 0.0:
            record_parameter_search("thm3", "unsatisfiable")
            raise UnsatisfiableParameters("all probed cross sums vanish")
    threshold = 1.0 - epsilon / 3.0 if threshold is None else threshold

    ell = choose_ell(delta, eta, threshold)
    if window is None:
        window, _ = calibrate_window(seq, ell, threshold, trials, master_seed, workers)
    elif window <= 2 * ell:
        raise DomainError(f"window {window} must exceed 2l = {2 * ell}")

    try:
        k, M = choose_shift_and_range(seq, eta, window, horizon)
    except UnsatisfiableParameters:
        record_parameter_search("thm3", "unsatisfiable")
        raise

    q = 1.0 - delta * delta * (1.0 - math.exp(-eta))
    if ell > 1 and q ** (ell - 1) < 1.0 - threshold:
        raise InvariantViolation(f"l={ell} is not minimal")
    v = seq.values(k + M)
    if M > 1 and math.fsum(v[:M - 1] * v[k:k + M - 1]) > eta:
        raise InvariantViolation(f"M={M} is not minimal")

    params = Thm3Params(delta=delta, eta=eta, epsilon=epsilon, threshold=threshold, ell=ell, W=window,
                        k=k, M=M, K=k + M, eta_probed=probed, minimal=True)
    record_parameter_search("thm3", "ok")
    log_parameter_choice("thm3", params.model_dump(exclude={"minimal"}))
    return params


# Exact companions

def prob_R_exact(seq: SequenceLike, params: Thm3Params) -> float:
    """delta^2 [1 - prod_{n<=M} (1 - p_n p_{n+k})]"""
    v = seq.values(params.k + params.M)
    cross = v[:params.M] * v[params.k:params.k + params.M]
    return float(params.delta ** 2 * (1.0 - np.prod(1.0 - cross)))


def t3_lower_bound(params: Thm3Params, prob_A: Optional[float] = None) -> float:
    """P(A) [1 - (1 - delta^2 (1 - e^-eta))^l]^2, with P(A) >= threshold by default"""
    prob_A = params.threshold if prob_A is None else prob_A
    q = 1.0 - params.delta ** 2 * (1.0 - math.exp(-params.eta))
    return prob_A * (1.0 - q**params.ell) ** 2


def prob_T3_given_A(seq: SequenceLike, params: Thm3Params, prob_A: float = 1.0) -> float:
    """The R events of one block are independent of each other and of A"""
    r = prob_R_exact(seq, params)
    return prob_A * (1.0 - (1.0 - r) ** params.ell) ** 2


# Event evaluation

def _check_truncation(aparams: AnisoParams, params: Thm3Params):
    if aparams.K < params.K:
        raise DomainError(f"truncation {aparams.K} is below k + M = {params.K}")


def A_footprint(x: int, y: int, W: int, K: int) -> FrozenSet[EdgeId]:
    return frozenset(horizontal_edge(x + a, y, n)
                     for n in range(1, min(K, W) + 1) for a in range(W - n + 1))


def eval_A(cfg: ConfigSeed, aparams: AnisoParams, x: int, y: int, W: int, ell: int) -> bool:
    """Are x .. x+2l connected by row-y bonds inside x .. x+W?"""
    if W <= 2 * ell:
        raise DomainError(f"window {W} must exceed 2l = {2 * ell}")
    labels = window_components(cfg, aparams, x, x + W, y, y).labels
    return bool(np.all(labels[:2 * ell + 1] == labels[0]))


def _R_edges(x: int, y: int, params: Thm3Params, sign: Sign) -> Tuple[List[EdgeId], List[Tuple[EdgeId, EdgeId]]]:
    k = params.k
    if Sign(sign) is Sign.PLUS:
        verticals = [vertical_edge(x, y), vertical_edge(x + k, y + 1)]
        pairs = [(horizontal_edge(x, y + 1, n + k), horizontal_edge(x + k, y + 1, n))
                 for n in range(1, params.M + 1)]
    else:
        verticals = [vertical_edge(x, y), vertical_edge(x - k, y + 1)]
        pairs = [(horizontal_edge(x, y + 1, n), horizontal_edge(x - k, y + 1, n + k))
                 for n in range(1, params.M + 1)]
    return verticals, pairs


def _eval_R(reader: EdgeReader, x: int, y: int, params: Thm3Params, sign: Sign) -> bool:
    verticals, pairs = _R_edges(x, y, params, sign)
    up = [reader.is_open(e) for e in verticals]
    across = [reader.is_open(a) & reader.is_open(b) for a, b in pairs]
    return all(up) and any(across)


def eval_R(cfg: ConfigSeed, aparams: AnisoParams, params: Thm3Params, x: int, y: int,
           sign: Sign) -> Tuple[bool, FrozenSet[EdgeId]]:
    _check_truncation(aparams, params)
    reader = aparams.reader(cfg)
    ok = _eval_R(reader, x, y, params, sign)
    return ok, frozenset(reader.footprint)


def eval_T3(cfg: ConfigSeed, aparams: AnisoParams, params: Thm3Params, x: int,
            y: int) -> Tuple[bool, FrozenSet[EdgeId]]:
    """A at (x, y), some R+ from x+i for i < l, some R- from x+i for l < i <= 2l"""
    _check_truncation(aparams, params)
    reader = aparams.reader(cfg)
    ell = params.ell
    plus = [_eval_R(reader, x + i, y, params, Sign.PLUS) for i in range(ell)]
    minus = [_eval_R(reader, x + i, y, params, Sign.MINUS) for i in range(ell + 1, 2 * ell + 1)]
    a = eval_A(cfg, aparams, x, y, params.W, ell)
    footprint = frozenset(reader.footprint) | A_footprint(x, y, params.W, aparams.K)
    return a and any(plus) and any(minus), footprint


def site_anchor(site: Site, params: Thm3Params) -> Tuple[int, int]:
    v1, v2 = site
    return params.k * (v1 - v2), 2 * (v1 + v2)


def red_site(cfg: ConfigSeed, aparams: AnisoParams, params: Thm3Params, site: Site) -> bool:
    if min(site) < 0:
        raise DomainError(f"site {site} lies outside the quadrant")
    return eval_T3(cfg, aparams, params, *site_anchor(site, params))[0]


# Exploration of the red cluster

class RedSiteRun(BaseModel):
    """One oriented red-site exploration and its coupling check"""
    reached: bool
    height: int
    depth: int = Field(..., description="Last generation v1+v2 holding a red site joined to the origin")
    path: List[Site] = Field(default_factory=list)
    sites_evaluated: int = 0
    red_sites: int = 0
    footprint_edges: int = 0
    footprint_overlaps: int = 0
    path_checks: int = 0
    path_violations: int = 0

    @property
    def violations(self) -> int:
        return self.footprint_overlaps + self.path_violations


def _trace(parent: Dict[Site, Optional[Site]], end: Site) -> List[Site]:
    path = [end]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path[::-1]


def red_site_explore(cfg: ConfigSeed, aparams: AnisoParams, params: Thm3Params, height: int) -> RedSiteRun:
    """
    Grow the red cluster of (0, 0) generation by generation, successors
    (v1+1, v2) and (v1, v2+1), until generation `height` or extinction.

    Every T event evaluated is checked for footprint overlap against all
    others, and each site on the path found is confirmed joined to the
    origin by open bonds of G^an inside a window covering the blocks.
    """
    if height < 1:
        raise DomainError("height must be positive")
    _check_truncation(aparams, params)

    status: Dict[Site, bool] = {}
    seen: Set[EdgeId] = set()
    tally = {"edges": 0, "overlaps": 0}

    def evaluate(site: Site) -> bool:
        if site not in status:
            ok, footprint = eval_T3(cfg, aparams, params, *site_anchor(site, params))
            for e in footprint:
                tally["edges"] += 1
                if e in seen:
                    tally["overlaps"] += 1
                seen.add(e)
            status[site] = ok
        return status[site]

    parent: Dict[Site, Optional[Site]] = {}
    frontier: List[Site] = []
    if evaluate((0, 0)):
        parent[(0, 0)] = None
        frontier = [(0, 0)]

    depth = 0
    while frontier and depth < height:
        grown: List[Site] = []
        for site in frontier:
            v1, v2 = site
            for nxt in ((v1 + 1, v2), (v1, v2 + 1)):
                if nxt not in parent and evaluate(nxt):
                    parent[nxt] = site
                    grown.append(nxt)
        if not grown:
            break
        frontier = sorted(grown)
        depth += 1

    path = _trace(parent, frontier[0]) if frontier else []
    checks = violations = 0
    if len(path) > 1:
        anchors = [site_anchor(s, params) for s in path]
        xs = [a[0] for a in anchors]
        reach = max(params.W, 2 * params.ell + params.k + params.M)
        graph = window_components(cfg, aparams, min(xs) - params.k, max(xs) + reach,
                                  0, max(a[1] for a in anchors) + 2)
        for anchor in anchors[1:]:
            checks += 1
            if not graph.connected((0, 0), anchor):
                violations += 1

    return RedSiteRun(reached=bool(frontier) and depth >= height, height=height, depth=depth if frontier else -1,
                      path=path, sites_evaluated=len(status), red_sites=sum(status.values()),
                      footprint_edges=tally["edges"], footprint_overlaps=tally["overlaps"],
                      path_checks=checks, path_violations=violations)


class RedSiteSummary(BaseModel):
    estimate: EstimateResult
    params: Thm3Params
    height: int
    runs: int
    sites_evaluated: int
    red_sites: int
    footprint_edges: int
    footprint_overlaps: int
    path_checks: int
    path_violations: int
    prob_R: float
    t3_lower_bound: float

    @property
    def violations(self) -> int:
        return self.footprint_overlaps + self.path_violations


def _explore_trial(aparams: AnisoParams, params: Thm3Params, height: int, master_seed: int, trial: int) -> RedSiteRun:
    return red_site_explore(ConfigSeed(master_seed=master_seed, trial=trial), aparams, params, height)


def red_site_runs(seq: SequenceLike, params: Thm3Params, height: int, trials: int, master_seed: int,
                  workers: Optional[int] = None) -> RedSiteSummary:
    """Survival to generation `height` over many trials, with coupling tallies"""
    aparams = AnisoParams(delta=params.delta, seq=seq, K=params.K)
    start = time.perf_counter()
    runs = run_trials(partial(_explore_trial, aparams, params, height, master_seed), trials, workers)
    estimate = build_estimate(sum(r.reached for r in runs), trials, master_seed, time.perf_counter() - start,
                              experiment="red_sites")
    summary = RedSiteSummary(
        estimate=estimate,
        params=params,
        height=height,
        runs=trials,
        sites_evaluated=sum(r.sites_evaluated for r in runs),
        red_sites=sum(r.red_sites for r in runs),
        footprint_edges=sum(r.footprint_edges for r in runs),
        footprint_overlaps=sum(r.footprint_overlaps for r in runs),
        path_checks=sum(r.path_checks for r in runs),
        path_violations=sum(r.path_violations for r in runs),
        prob_R=prob_R_exact(seq, params),
        t3_lower_bound=t3_lower_bound(params),
    )
    record_coupling_check("red_sites", summary.path_checks, summary.path_violations)
    record_coupling_check("red_site_footprints", summary.footprint_edges, summary.footprint_overlaps)
    log_coupling_report("red_sites", summary.path_checks, summary.violations)
    return summary


def _t3_trial(aparams: AnisoParams, params: Thm3Params, master_seed: int, trial: int) -> bool:
    return eval_T3(ConfigSeed(master_seed=master_seed, trial=trial), aparams, params, 0, 0)[0]


def estimate_T3(seq: SequenceLike, params: Thm3Params, trials: int, master_seed: int,
                workers: Optional[int] = None) -> EstimateResult:
    aparams = AnisoParams(delta=params.delta, seq=seq, K=params.K)
    return estimate_from_trials(partial(_t3_trial, aparams, params, master_seed), trials, master_seed, workers,
                                experiment="thm3_T")
