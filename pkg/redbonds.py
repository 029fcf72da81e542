"""
Red bonds: nearest-neighbour bond percolation inside G^an

For a shift N the event E(x, y, n) asks that <(x,y),(x+n,y)> and
<(x+n,y),(x-N,y)> are open, which joins (x-N, y) to (x, y). H-(x, y) is
E for some n in 1..M1 and H+(x, y) is E for some n in the plus range.

A horizontal bond <(v1,v2),(v1+1,v2)> of the square lattice is red when
H- (v1 even) or H+ (v1 odd) holds at (N(v1+1), v2); a vertical bond
<(v1,v2),(v1,v2+1)> is red when the unit bond above (N v1, v2) is open.
Renormalized vertex (v1, v2) sits at (N v1, v2).

Two layouts are offered for the plus range. ``printed`` uses M1+1..M2.
``separated`` (the default) starts at M1+N+1, which keeps the bond sets of
neighbouring red bonds disjoint.
"""
import logging
from enum import Enum
from functools import partial
from typing import FrozenSet, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from aniso import AnisoParams, window_components
from config import get_settings
from connectivity import UnionFind
from errors import DomainError, InvariantViolation, UnsatisfiableParameters
from logging_config import log_coupling_report, log_parameter_choice
from metrics import record_coupling_check, record_parameter_search
from montecarlo import run_trials, within_sigmas
from renorm import Sign
from sampler import ConfigSeed, EdgeId, horizontal_edge, vertical_edge
from sequences import SequenceLike

logger = logging.getLogger(__name__)

ANCHOR_CONVENTION = "horizontal red bond <(v1,v2),(v1+1,v2)> evaluated at (N(v1+1), v2); vertex (v1,v2) -> (N v1, v2)"

Vertex = Tuple[int, int]
Bond = Tuple[Vertex, Vertex]


class Thm2Layout(str, Enum):
    SEPARATED = "separated"
    PRINTED = "printed"


class Thm2Params(BaseModel):
    """Shift N, ranges 1..M1 and plus_start..M2, truncation K = M2 + N"""

    model_config = ConfigDict(frozen=True)

    N: int = Field(..., ge=1)
    epsilon: float = Field(..., gt=0.0, lt=1.0)
    M1: int = Field(..., ge=1)
    M2: int = Field(..., ge=2)
    K: int = Field(..., ge=3)
    layout: Thm2Layout = Thm2Layout.SEPARATED
    plus_start: int = Field(..., ge=2)
    minimal: bool = False

    def lengths(self, sign: Sign) -> range:
        if Sign(sign) is Sign.MINUS:
            return range(1, self.M1 + 1)
        return range(self.plus_start, self.M2 + 1)


def choose_thm2_params(seq: SequenceLike, N: int, epsilon: float, horizon: Optional[int] = None,
                       layout: Thm2Layout = Thm2Layout.SEPARATED) -> Thm2Params:
    """
    Minimal M1 with exp(-sum_{n<=M1} p_n p_{n+N}) < eps, then minimal M2
    with the same bound over the plus range.
    """
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if N < 1:
        raise DomainError("shift N must be positive")
    layout = Thm2Layout(layout)
    horizon = horizon or get_settings().default_horizon

    v = seq.values(horizon + N)
    c = v[:horizon] * v[N:N + horizon]

    ok1 = np.exp(-np.cumsum(c)) < epsilon
    if not ok1.any():
        record_parameter_search("thm2", "unsatisfiable")
        raise UnsatisfiableParameters(f"cross sum for N={N} never exceeds ln(1/eps) within horizon {horizon}")
    M1 = int(np.argmax(ok1)) + 1

    start = M1 + 1 if layout == Thm2Layout.PRINTED else M1 + N + 1
    ok2 = np.exp(-np.cumsum(c[start - 1:])) < epsilon if start <= horizon else np.zeros(0, dtype=bool)
    if not ok2.any():
        record_parameter_search("thm2", "unsatisfiable")
        raise UnsatisfiableParameters(f"second range from {start} never exceeds ln(1/eps) within horizon {horizon}")
    M2 = start + int(np.argmax(ok2))

    if (M1 > 1 and ok1[M1 - 2]) or (M2 > start and ok2[M2 - start - 1]):
        raise InvariantViolation(f"M1={M1}, M2={M2} are not minimal")

    params = Thm2Params(N=N, epsilon=epsilon, M1=M1, M2=M2, K=M2 + N, layout=layout,
                        plus_start=start, minimal=True)
    record_parameter_search("thm2", "ok")
    log_parameter_choice("thm2", {"N": N, "epsilon": epsilon, "M1": M1, "M2": M2, "K": params.K,
                                  "layout": layout.value})
    return params


def prob_E_exact(seq: SequenceLike, N: int, n: int) -> float:
    return seq.eval(n) * seq.eval(n + N)


def prob_H_exact(seq: SequenceLike, params: Thm2Params, sign: Sign) -> float:
    """1 - prod over the range of (1 - p_n p_{n+N})"""
    lengths = params.lengths(sign)
    v = seq.values(lengths.stop - 1 + params.N)
    n = np.arange(lengths.start, lengths.stop)
    return float(1.0 - np.prod(1.0 - v[n - 1] * v[n - 1 + params.N]))


def _E_edges(x: int, y: int, N: int, n: int) -> Tuple[EdgeId, EdgeId]:
    return horizontal_edge(x, y, n), horizontal_edge(x - N, y, n + N)


def H_footprint(x: int, y: int, params: Thm2Params, sign: Sign) -> FrozenSet[EdgeId]:
    return frozenset(e for n in params.lengths(sign) for e in _E_edges(x, y, params.N, n))


def _check_truncation(aparams: AnisoParams, params: Thm2Params):
    if aparams.K < params.K:
        raise DomainError(f"truncation {aparams.K} is below M2 + N = {params.K}")


def eval_event_E(cfg: ConfigSeed, aparams: AnisoParams, params: Thm2Params, x: int, y: int,
                 n: int) -> Tuple[bool, FrozenSet[EdgeId]]:
    _check_truncation(aparams, params)
    reader = aparams.reader(cfg)
    a, b = _E_edges(x, y, params.N, n)
    ok = reader.is_open(a) & reader.is_open(b)
    return ok, frozenset(reader.footprint)


def eval_event_H(cfg: ConfigSeed, aparams: AnisoParams, params: Thm2Params, x: int, y: int,
                 sign: Sign) -> Tuple[bool, FrozenSet[EdgeId]]:
    """H at (x, y); reads every bond of the range so the footprint is the full range"""
    _check_truncation(aparams, params)
    reader = aparams.reader(cfg)
    hits = [reader.is_open(a) & reader.is_open(b)
            for a, b in (_E_edges(x, y, params.N, n) for n in params.lengths(sign))]
    return any(hits), frozenset(reader.footprint)


def _normalise_bond(bond: Bond) -> Tuple[Vertex, bool]:
    (a1, a2), (b1, b2) = bond
    if abs(a1 - b1) + abs(a2 - b2) != 1:
        raise DomainError(f"{bond} is not a nearest-neighbour bond")
    lower = min((a1, a2), (b1, b2))
    return lower, a2 == b2


def map_vertex(v: Vertex, params: Thm2Params) -> Vertex:
    return params.N * v[0], v[1]


def red_bond_event(cfg: ConfigSeed, aparams: AnisoParams, params: Thm2Params,
                   bond: Bond) -> Tuple[bool, FrozenSet[EdgeId], Optional[Sign]]:
    (v1, v2), horizontal = _normalise_bond(bond)
    if horizontal:
        sign = Sign.MINUS if v1 % 2 == 0 else Sign.PLUS
        ok, footprint = eval_event_H(cfg, aparams, params, params.N * (v1 + 1), v2, sign)
        return ok, footprint, sign
    reader = aparams.reader(cfg)
    ok = reader.is_open(vertical_edge(params.N * v1, v2))
    return ok, frozenset(reader.footprint), None


def red_bond(cfg: ConfigSeed, aparams: AnisoParams, params: Thm2Params, bond: Bond) -> bool:
    return red_bond_event(cfg, aparams, params, bond)[0]


_SUMMED = ("trials", "bonds", "red_bonds", "footprint_edges", "footprint_overlaps", "red_checks",
           "red_violations", "path_checks", "path_violations", "minus_hits", "minus_total",
           "plus_hits", "plus_total", "vertical_hits", "vertical_total")


class Thm2Report(BaseModel):
    """Coupling tallies for red bonds in a box, possibly over many trials"""
    box: int
    trials: int = 1
    layout: Thm2Layout
    anchor_convention: str = ANCHOR_CONVENTION
    bonds: int = 0
    red_bonds: int = 0
    footprint_edges: int = 0
    footprint_overlaps: int = 0
    red_checks: int = 0
    red_violations: int = 0
    path_checks: int = 0
    path_violations: int = 0
    minus_hits: int = 0
    minus_total: int = 0
    plus_hits: int = 0
    plus_total: int = 0
    vertical_hits: int = 0
    vertical_total: int = 0
    prob_minus: float
    prob_plus: float
    delta: float

    @property
    def violations(self) -> int:
        return self.red_violations + self.path_violations

    def marginals_within(self, sigmas: float = 4.0) -> bool:
        checks = [
            (self.minus_hits, self.minus_total, self.prob_minus),
            (self.plus_hits, self.plus_total, self.prob_plus),
            (self.vertical_hits, self.vertical_total, self.delta),
        ]
        return all(within_sigmas(h / t, p, t, sigmas) for h, t, p in checks if t)

    def merge(self, other: "Thm2Report") -> "Thm2Report":
        data = self.model_dump()
        for name in _SUMMED:
            data[name] += getattr(other, name)
        return Thm2Report(**data)


def box_bonds(box: int) -> List[Bond]:
    bonds = []
    for v2 in range(box):
        for v1 in range(box):
            if v1 + 1 < box:
                bonds.append(((v1, v2), (v1 + 1, v2)))
            if v2 + 1 < box:
                bonds.append(((v1, v2), (v1, v2 + 1)))
    return bonds


def verify_thm2_coupling(cfg: ConfigSeed, aparams: AnisoParams, params: Thm2Params, box: int) -> Thm2Report:
    """
    Evaluate every red bond of [0, box-1]^2 and check:
    footprints pairwise disjoint, each red bond's mapped endpoints connected
    in G^an, the whole red cluster of the origin mapped into the origin's
    open cluster, and red-bond marginals against the exact products.
    """
    if box < 2:
        raise DomainError("box size must be at least 2")
    _check_truncation(aparams, params)

    report = Thm2Report(box=box, layout=params.layout, prob_minus=prob_H_exact(aparams.seq, params, Sign.MINUS),
                        prob_plus=prob_H_exact(aparams.seq, params, Sign.PLUS), delta=aparams.delta)
    counts = report.model_dump()

    graph = window_components(cfg, aparams, 0, params.N * (box - 1) + params.M2, 0, box - 1)
    red_uf = UnionFind(box * box)
    owner = set()

    for bond in box_bonds(box):
        ok, footprint, sign = red_bond_event(cfg, aparams, params, bond)
        counts["bonds"] += 1
        for e in footprint:
            counts["footprint_edges"] += 1
            if e in owner:
                counts["footprint_overlaps"] += 1
            owner.add(e)

        tally = "vertical" if sign is None else ("minus" if sign is Sign.MINUS else "plus")
        counts[f"{tally}_total"] += 1
        if not ok:
            continue
        counts[f"{tally}_hits"] += 1
        counts["red_bonds"] += 1

        a, b = bond
        red_uf.union(a[1] * box + a[0], b[1] * box + b[0])
        counts["red_checks"] += 1
        if not graph.connected(map_vertex(a, params), map_vertex(b, params)):
            counts["red_violations"] += 1

    origin = map_vertex((0, 0), params)
    for v2 in range(box):
        for v1 in range(box):
            if (v1, v2) != (0, 0) and red_uf.connected(0, v2 * box + v1):
                counts["path_checks"] += 1
                if not graph.connected(origin, map_vertex((v1, v2), params)):
                    counts["path_violations"] += 1

    return Thm2Report(**counts)


def _thm2_trial(aparams: AnisoParams, params: Thm2Params, box: int, master_seed: int, trial: int) -> Thm2Report:
    return verify_thm2_coupling(ConfigSeed(master_seed=master_seed, trial=trial), aparams, params, box)


def verify_thm2_trials(seq: SequenceLike, delta: float, N: int, epsilon: float, box: int, trials: int,
                       master_seed: int, horizon: Optional[int] = None,
                       layout: Thm2Layout = Thm2Layout.SEPARATED,
                       workers: Optional[int] = None) -> Tuple[Thm2Params, Thm2Report]:
    params = choose_thm2_params(seq, N, epsilon, horizon, layout)
    aparams = AnisoParams(delta=delta, seq=seq, K=params.K)
    reports = run_trials(partial(_thm2_trial, aparams, params, box, master_seed), trials, workers)

    total = reports[0]
    for r in reports[1:]:
        total = total.merge(r)
    record_coupling_check("red_bonds", total.red_checks + total.path_checks, total.violations)
    record_coupling_check("red_bond_footprints", total.footprint_edges, total.footprint_overlaps)
    log_coupling_report("red_bonds", total.red_checks + total.path_checks, total.violations)
    if total.footprint_overlaps:
        logger.warning(f"{total.footprint_overlaps} footprint overlaps with layout {params.layout.value}",
                       extra={"layout": params.layout.value, "overlaps": total.footprint_overlaps})
    return params, total
