"""
Lazy Bernoulli sampling over infinite edge sets

Every canonical edge is encoded as a fixed-width row of signed 64-bit words
(model tag first, then the model's fields in declaration order). Its
uniform variate is a splitmix64 chain over those words, keyed by
(master seed, trial). Truncation never enters the variate, so the open
sets for K <= K' are nested edge by edge.

Word layouts (encoding version 1):
    oriented  [1, d, m, axis, step, x_1 .. x_d]
    aniso     [2, x, y, axis, step]     axis 0 horizontal, 1 vertical
    line1d    [3, i, gap]
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Set, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from errors import ContractViolation, DomainError
from sequences import SequenceLike

logger = logging.getLogger(__name__)

GENERATOR = "splitmix64-chain"
ENCODING_VERSION = 1

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
UNIT = 1.0 / (1 << 53)

_GAMMA64 = np.uint64(GAMMA)
_MIX1_64 = np.uint64(MIX1)
_MIX2_64 = np.uint64(MIX2)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))


class EdgeModel(str, Enum):
    ORIENTED = "oriented"
    ANISO = "aniso"
    LINE1D = "line1d"


_MODEL_TAG = {EdgeModel.ORIENTED: 1, EdgeModel.ANISO: 2, EdgeModel.LINE1D: 3}

HORIZONTAL = 0
VERTICAL = 1


@dataclass(frozen=True, slots=True)
class EdgeId:
    """
    A bond addressed by its base vertex, axis and signed step.

    oriented: base = (x_1, .., x_d, m), bond to (x + step*e_axis, m + 1)
    aniso:    base = (x, y); horizontal bonds reach (x + step, y),
              vertical bonds (step 1) reach (x, y + 1)
    line1d:   base = (i,), bond to i + step
    """
    model: EdgeModel
    base: Tuple[int, ...]
    axis: int
    step: int

    @property
    def is_vertical(self) -> bool:
        return self.model == EdgeModel.ANISO and self.axis == VERTICAL

    @property
    def length(self) -> Optional[int]:
        """Index n of the governing p_n; None for vertical aniso bonds"""
        if self.is_vertical:
            return None
        return abs(self.step)

    def is_canonical(self) -> bool:
        if self.step == 0:
            return False
        if self.model == EdgeModel.ORIENTED:
            return len(self.base) >= 2 and 0 <= self.axis < len(self.base) - 1 and self.base[-1] >= 0
        if self.model == EdgeModel.ANISO:
            if len(self.base) != 2 or self.axis not in (HORIZONTAL, VERTICAL):
                return False
            return self.step > 0 if self.axis == HORIZONTAL else self.step == 1
        return len(self.base) == 1 and self.axis == 0 and self.step > 0 and self.base[0] >= 0

    def canonical(self) -> "EdgeId":
        """The canonical representative of the same undirected bond"""
        if self.model == EdgeModel.ORIENTED or self.step > 0:
            return self
        if self.model == EdgeModel.ANISO:
            x, y = self.base
            if self.axis == HORIZONTAL:
                return EdgeId(self.model, (x + self.step, y), HORIZONTAL, -self.step)
            return EdgeId(self.model, (x, y + self.step), VERTICAL, -self.step)
        return EdgeId(self.model, (self.base[0] + self.step,), 0, -self.step)

    def words(self) -> Tuple[int, ...]:
        tag = _MODEL_TAG[self.model]
        if self.model == EdgeModel.ORIENTED:
            *x, m = self.base
            return (tag, len(x), m, self.axis, self.step, *x)
        if self.model == EdgeModel.ANISO:
            return (tag, self.base[0], self.base[1], self.axis, self.step)
        return (tag, self.base[0], self.step)


def oriented_edge(x: Union[int, Sequence[int]], m: int, axis: int, step: int) -> EdgeId:
    coords = (int(x),) if isinstance(x, (int, np.integer)) else tuple(int(c) for c in x)
    return EdgeId(EdgeModel.ORIENTED, (*coords, int(m)), int(axis), int(step))


def horizontal_edge(x: int, y: int, length: int) -> EdgeId:
    """The bond between (x, y) and (x + length, y), in canonical form"""
    if length == 0:
        raise DomainError("zero-length bonds do not exist")
    return EdgeId(EdgeModel.ANISO, (int(x), int(y)), HORIZONTAL, int(length)).canonical()


def vertical_edge(x: int, y: int) -> EdgeId:
    """The bond between (x, y) and (x, y + 1)"""
    return EdgeId(EdgeModel.ANISO, (int(x), int(y)), VERTICAL, 1)


def line_edge(i: int, j: int) -> EdgeId:
    if i == j:
        raise DomainError("zero-length bonds do not exist")
    lo, hi = min(i, j), max(i, j)
    if lo < 0:
        raise DomainError("line vertices are nonnegative")
    return EdgeId(EdgeModel.LINE1D, (int(lo),), 0, int(hi - lo))


class ConfigSeed(BaseModel):
    """(master seed, trial index) names one configuration"""

    model_config = ConfigDict(frozen=True)

    master_seed: int = Field(..., ge=0, le=MASK64, description="64-bit master seed")
    trial: int = Field(0, ge=0, description="Trial index")

    @property
    def key(self) -> int:
        return trial_key(self.master_seed, self.trial)


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def _mix_vec(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _MIX1_64
    z = (z ^ (z >> _S27)) * _MIX2_64
    return z ^ (z >> _S31)


def trial_key(master_seed: int, trial: int) -> int:
    h = _mix((master_seed + GAMMA) & MASK64)
    return _mix(((h ^ (trial & MASK64)) + GAMMA) & MASK64)


def hash_words(key: int, words: Sequence[int]) -> int:
    h = key
    for w in words:
        h = _mix(((h ^ (w & MASK64)) + GAMMA) & MASK64)
    return h


def uniform_at(cfg: ConfigSeed, e: EdgeId) -> float:
    """The coupling variate U_e in [0, 1)"""
    if not e.is_canonical():
        raise ContractViolation(f"edge {e} is not in canonical form")
    return (hash_words(cfg.key, e.words()) >> 11) * UNIT


def uniform_words(key: Union[int, np.ndarray], words: np.ndarray) -> np.ndarray:
    """
    Vectorised variates for a (rows, width) int64 word matrix.

    ``key`` is one trial key or an array with one key per row. Rows must be
    canonical encodings; the result is bit-identical to ``uniform_at``.
    """
    words = np.ascontiguousarray(words, dtype=np.int64)
    if words.ndim != 2:
        raise DomainError("word matrix must be two-dimensional")
    cols = words.view(np.uint64)
    if np.ndim(key) == 0:
        h = np.full(words.shape[0], int(key), dtype=np.uint64)
    else:
        h = np.asarray(key, dtype=np.uint64).copy()
    for j in range(words.shape[1]):
        h = _mix_vec((h ^ cols[:, j]) + _GAMMA64)
    return (h >> _S11).astype(np.float64) * UNIT


def oriented_words(x: np.ndarray, m: Union[int, np.ndarray], step: np.ndarray, axis: Union[int, np.ndarray] = 0) -> np.ndarray:
    """Word rows for oriented edges; ``x`` has shape (rows,) or (rows, d)"""
    x = np.asarray(x, dtype=np.int64)
    if x.ndim == 1:
        x = x[:, None]
    rows, d = x.shape
    out = np.empty((rows, 5 + d), dtype=np.int64)
    out[:, 0] = _MODEL_TAG[EdgeModel.ORIENTED]
    out[:, 1] = d
    out[:, 2] = m
    out[:, 3] = axis
    out[:, 4] = step
    out[:, 5:] = x
    return out


def aniso_words(x: np.ndarray, y: Union[int, np.ndarray], axis: Union[int, np.ndarray], step: Union[int, np.ndarray]) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    out = np.empty((x.shape[0], 5), dtype=np.int64)
    out[:, 0] = _MODEL_TAG[EdgeModel.ANISO]
    out[:, 1] = x
    out[:, 2] = y
    out[:, 3] = axis
    out[:, 4] = step
    return out


def line_words(i: np.ndarray, gap: Union[int, np.ndarray]) -> np.ndarray:
    i = np.asarray(i, dtype=np.int64)
    out = np.empty((i.shape[0], 3), dtype=np.int64)
    out[:, 0] = _MODEL_TAG[EdgeModel.LINE1D]
    out[:, 1] = i
    out[:, 2] = gap
    return out


def is_open(cfg: ConfigSeed, e: EdgeId, seq: SequenceLike, K: Union[int, float] = math.inf,
            delta: Optional[float] = None) -> bool:
    """
    True iff length(e) <= K and U_e < p_{length(e)}.

    Vertical aniso bonds compare U_e with delta and are never truncated.
    """
    if e.is_vertical:
        if delta is None:
            raise DomainError("vertical bonds need delta")
        return uniform_at(cfg, e) < delta
    if delta is not None:
        raise ContractViolation("delta applies to vertical aniso bonds only")
    n = e.length
    if n > K:
        return False
    return uniform_at(cfg, e) < seq.eval(n)


class EdgeReader:
    """Answers is_open queries for one configuration and records what it read"""

    def __init__(self, cfg: ConfigSeed, seq: SequenceLike, K: Union[int, float] = math.inf,
                 delta: Optional[float] = None, record: bool = True):
        self.cfg = cfg
        self.seq = seq
        self.K = K
        self.delta = delta
        self.record = record
        self.footprint: Set[EdgeId] = set()
        self._key = cfg.key
        self._probs = {}

    def _p(self, n: int) -> float:
        p = self._probs.get(n)
        if p is None:
            p = self._probs[n] = self.seq.eval(n)
        return p

    def is_open(self, e: EdgeId) -> bool:
        if not e.is_canonical():
            raise ContractViolation(f"edge {e} is not in canonical form")
        if self.record:
            self.footprint.add(e)
        u = (hash_words(self._key, e.words()) >> 11) * UNIT
        if e.is_vertical:
            if self.delta is None:
                raise DomainError("vertical bonds need delta")
            return u < self.delta
        n = e.length
        return n <= self.K and u < self._p(n)

    def take_footprint(self) -> Set[EdgeId]:
        """Return the edges read since the last call and start afresh"""
        footprint, self.footprint = self.footprint, set()
        return footprint
