"""
Parameter sequences for perctrunc

A sequence (p_n) gives the probability that a bond of length n is open.
Everything downstream consumes sequences through two accessors:
``eval(n)`` for a single index and ``values(upto)`` for the numpy vector
p_1..p_upto. Truncation at range K zeroes every p_n with n > K.
"""
import logging
import math
import operator
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from errors import DomainError, SequenceSpecError

logger = logging.getLogger(__name__)


class SequenceKind(str, Enum):
    """Closed-form families and tabulated data"""
    CONSTANT = "constant"
    POWER_LAW = "power-law"
    INVERSE_SQRT = "inverse-sqrt"
    INDICATOR_P = "indicator-p"
    INDICATOR_Q = "indicator-q"
    TABLE = "table"


class TailRule(str, Enum):
    """Value of a table sequence beyond its last tabulated index"""
    ZERO = "zero"
    HOLD = "hold"


class SumMode(str, Enum):
    PLAIN = "plain"
    SQUARES = "squares"
    CROSS = "cross"


def _check_index(n) -> int:
    try:
        n = operator.index(n)
    except TypeError:
        raise DomainError(f"bond length must be an integer, got {n!r}")
    if n < 1:
        raise DomainError(f"bond length must be positive, got {n}")
    return n


def _power_exponent(n: int, base: int) -> Optional[int]:
    """Return e with base**e == n, or None"""
    e = 0
    while n % base == 0:
        n //= base
        e += 1
    return e if n == 1 else None


class ProbSequence(BaseModel):
    """An immutable sequence (p_n)_{n>=1} with values in [0, 1]"""

    model_config = ConfigDict(frozen=True)

    kind: SequenceKind = Field(..., description="Sequence family")
    p: Optional[float] = Field(None, description="Constant value")
    c: Optional[float] = Field(None, description="Power-law scale")
    alpha: Optional[float] = Field(None, description="Power-law exponent")
    table: Tuple[Tuple[int, float], ...] = Field((), description="(n, p_n) pairs")
    tail: TailRule = Field(TailRule.ZERO, description="Table tail rule")
    source: Optional[str] = Field(None, description="Table file the values came from")

    _index: List[int] = PrivateAttr(default_factory=list)
    _lookup: Dict[int, float] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _validate(self):
        if self.kind == SequenceKind.CONSTANT:
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ValueError("constant sequence needs p in [0, 1]")
        elif self.kind == SequenceKind.POWER_LAW:
            if self.c is None or self.alpha is None:
                raise ValueError("power-law sequence needs c and alpha")
            if not 0.0 <= self.c <= 1.0 or self.alpha < 0.0:
                raise ValueError("power-law sequence needs 0 <= c <= 1 and alpha >= 0")
        elif self.kind == SequenceKind.TABLE:
            indices = [n for n, _ in self.table]
            if any(n < 1 for n in indices):
                raise ValueError("table indices must be positive")
            if any(b <= a for a, b in zip(indices, indices[1:])):
                raise ValueError("table indices must be strictly increasing")
            if any(not 0.0 <= v <= 1.0 for _, v in self.table):
                raise ValueError("table values must lie in [0, 1]")
        return self

    def model_post_init(self, __context) -> None:
        if self.kind == SequenceKind.TABLE:
            self._index = [n for n, _ in self.table]
            self._lookup = dict(self.table)

    @classmethod
    def from_table(cls, entries: Mapping[int, float], tail: Union[TailRule, str] = TailRule.ZERO,
                   source: Optional[str] = None) -> "ProbSequence":
        pairs = tuple(sorted((int(n), float(v)) for n, v in entries.items()))
        try:
            return cls(kind=SequenceKind.TABLE, table=pairs, tail=TailRule(tail), source=source)
        except ValueError as e:
            raise SequenceSpecError(str(e)) from e

    def eval(self, n: int) -> float:
        n = _check_index(n)
        kind = self.kind

        if kind == SequenceKind.CONSTANT:
            return self.p
        if kind == SequenceKind.POWER_LAW:
            return self.c * float(n) ** (-self.alpha)
        if kind == SequenceKind.INVERSE_SQRT:
            return 1.0 / math.sqrt(n)
        if kind == SequenceKind.INDICATOR_P:
            for m in (n, n - 1):
                if m >= 3:
                    k = _power_exponent(m, 3)
                    if k:
                        return 1.0 / math.sqrt(k)
            return 0.0
        if kind == SequenceKind.INDICATOR_Q:
            k, scale = 0, 1
            while scale * 100 <= n:
                scale *= 100
                k += 1
            if k < 2:
                return 0.0
            step = 3**k
            r = n - scale
            if r > 0 and r % step == 0 and r // step <= 100:
                return 1.0 / (2.0 * math.sqrt(k - 1))
            return 0.0

        # table
        if n in self._lookup:
            return self._lookup[n]
        if self._index and n > self._index[-1] and self.tail == TailRule.HOLD:
            return self.table[-1][1]
        return 0.0

    def values(self, upto: int) -> np.ndarray:
        """p_1..p_upto as a float64 array (position i holds p_{i+1})"""
        if upto < 0:
            raise DomainError("upto must be nonnegative")
        kind = self.kind
        n = np.arange(1, upto + 1, dtype=np.float64)

        if kind == SequenceKind.CONSTANT:
            return np.full(upto, self.p, dtype=np.float64)
        if kind == SequenceKind.POWER_LAW:
            return self.c * n ** (-self.alpha)
        if kind == SequenceKind.INVERSE_SQRT:
            return 1.0 / np.sqrt(n)

        out = np.zeros(upto, dtype=np.float64)
        if kind == SequenceKind.INDICATOR_P:
            k = 1
            while 3**k <= upto:
                val = 1.0 / math.sqrt(k)
                out[3**k - 1] = val
                if 3**k + 1 <= upto:
                    out[3**k] = val
                k += 1
        elif kind == SequenceKind.INDICATOR_Q:
            k = 2
            while 100**k + 3**k <= upto:
                idx = 100**k + np.arange(1, 101, dtype=np.int64) * 3**k
                idx = idx[idx <= upto]
                out[idx - 1] = 1.0 / (2.0 * math.sqrt(k - 1))
                k += 1
        else:
            for i, v in self.table:
                if i > upto:
                    break
                out[i - 1] = v
            if self.tail == TailRule.HOLD and self._index and self._index[-1] < upto:
                out[self._index[-1]:] = self.table[-1][1]
        return out

    @property
    def spec_string(self) -> str:
        """Render back to the sequence mini-grammar"""
        if self.kind == SequenceKind.CONSTANT:
            return f"const:p={self.p!r}"
        if self.kind == SequenceKind.POWER_LAW:
            return f"powlaw:c={self.c!r},alpha={self.alpha!r}"
        if self.kind == SequenceKind.INVERSE_SQRT:
            return "invsqrt"
        if self.kind == SequenceKind.INDICATOR_P:
            return "remark-p"
        if self.kind == SequenceKind.INDICATOR_Q:
            return "remark-q"
        source = self.source or f"inline[{len(self.table)}]"
        return f"table:{source},tail={self.tail.value}"


class TruncatedSequence(BaseModel):
    """p_n^K: the base sequence below K, zero above"""

    model_config = ConfigDict(frozen=True)

    base: ProbSequence
    K: int = Field(..., ge=1, description="Truncation range")

    def eval(self, n: int) -> float:
        n = _check_index(n)
        return self.base.eval(n) if n <= self.K else 0.0

    def values(self, upto: int) -> np.ndarray:
        out = np.zeros(upto, dtype=np.float64)
        head = min(upto, self.K)
        out[:head] = self.base.values(head)
        return out

    @property
    def spec_string(self) -> str:
        return f"{self.base.spec_string}|K={self.K}"


SequenceLike = Union[ProbSequence, TruncatedSequence]


def truncate(seq: SequenceLike, K: int) -> TruncatedSequence:
    """Zero every p_n with n > K; truncating twice keeps the smaller range"""
    if not isinstance(K, (int, np.integer)) or K < 1:
        raise DomainError(f"truncation range must be a positive integer, got {K!r}")
    if isinstance(seq, TruncatedSequence):
        return TruncatedSequence(base=seq.base, K=min(seq.K, int(K)))
    return TruncatedSequence(base=seq, K=int(K))


def _check_horizon(horizon: int):
    if horizon < 1:
        raise DomainError(f"horizon must be positive, got {horizon}")


def partial_sum(seq: SequenceLike, mode: Union[SumMode, str], horizon: int,
                shift: Optional[int] = None) -> float:
    """Sum of p_n, p_n**2 or p_n*p_{n+shift} over n = 1..horizon"""
    _check_horizon(horizon)
    mode = SumMode(mode)

    if mode == SumMode.CROSS:
        if shift is None or shift < 1:
            raise DomainError("cross sums need a shift N >= 1")
        v = seq.values(horizon + shift)
        return math.fsum(v[:horizon] * v[shift:shift + horizon])
    if shift is not None:
        raise DomainError("shift only applies to cross sums")

    v = seq.values(horizon)
    if mode == SumMode.SQUARES:
        return math.fsum(v * v)
    return math.fsum(v)


def shifted_square_sum(seq: SequenceLike, shift: int, horizon: int) -> float:
    """Sum of p_{n+shift}**2 over n = 1..horizon"""
    v = seq.values(horizon + shift)
    tail = v[shift:shift + horizon]
    return math.fsum(tail * tail)


def support_min(seq: SequenceLike, horizon: int) -> Optional[int]:
    _check_horizon(horizon)
    nz = np.flatnonzero(seq.values(horizon) > 0.0)
    return int(nz[0]) + 1 if nz.size else None


def support_gcd(seq: SequenceLike, horizon: int) -> Optional[int]:
    """
    gcd of the support within the horizon.

    A finite-horizon gcd only certifies the true gcd when it equals 1;
    larger values are upper bounds.
    """
    _check_horizon(horizon)
    nz = np.flatnonzero(seq.values(horizon) > 0.0)
    if not nz.size:
        return None
    return int(np.gcd.reduce(nz + 1))


def builtin(name: str, **params) -> ProbSequence:
    """Construct one of the named closed-form sequences"""
    try:
        if name == "remark-p":
            return ProbSequence(kind=SequenceKind.INDICATOR_P)
        if name == "remark-q":
            return ProbSequence(kind=SequenceKind.INDICATOR_Q)
        if name == "inverse-sqrt":
            return ProbSequence(kind=SequenceKind.INVERSE_SQRT)
        if name == "constant":
            return ProbSequence(kind=SequenceKind.CONSTANT, p=float(params["p"]))
        if name == "power-law":
            return ProbSequence(kind=SequenceKind.POWER_LAW, c=float(params["c"]),
                                alpha=float(params["alpha"]))
    except KeyError as e:
        raise SequenceSpecError(f"sequence '{name}' is missing parameter {e}") from e
    except ValueError as e:
        raise SequenceSpecError(f"invalid parameters for '{name}': {e}") from e
    raise SequenceSpecError(f"unknown sequence '{name}'")


def _parse_kv(text: str) -> Dict[str, str]:
    out = {}
    for part in filter(None, (s.strip() for s in text.split(","))):
        if "=" not in part:
            raise SequenceSpecError(f"expected key=value, got '{part}'")
        key, value = part.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_table(path: Union[str, Path], tail: Union[TailRule, str] = TailRule.ZERO) -> ProbSequence:
    """Read a two-column CSV with header n,p"""
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise SequenceSpecError(f"{path}: unreadable table ({e})") from e
    frame.columns = [str(c).strip() for c in frame.columns]
    if list(frame.columns) != ["n", "p"]:
        raise SequenceSpecError(f"{path}: expected columns n,p, got {list(frame.columns)}")
    if frame.empty:
        raise SequenceSpecError(f"{path}: table is empty")
    if frame["n"].isna().any() or frame["p"].isna().any():
        raise SequenceSpecError(f"{path}: table has missing values")
    try:
        n_col = frame["n"].to_numpy(dtype=np.float64)
        frame["p"] = frame["p"].astype(np.float64)
    except ValueError as e:
        raise SequenceSpecError(f"{path}: non-numeric entries") from e
    if not np.all(np.mod(n_col, 1.0) == 0.0):
        raise SequenceSpecError(f"{path}: indices must be integers")

    entries = dict(zip(frame["n"].astype(np.int64).tolist(), frame["p"].astype(np.float64).tolist()))
    if len(entries) != len(frame):
        raise SequenceSpecError(f"{path}: duplicate indices")
    if list(entries) != sorted(entries):
        raise SequenceSpecError(f"{path}: indices must be strictly increasing")
    return ProbSequence.from_table(entries, tail=tail, source=str(path))


def parse_sequence_spec(text: str) -> ProbSequence:
    """
    Parse the sequence mini-grammar:
    const:p=0.5 | powlaw:c=1,alpha=0.5 | invsqrt | remark-p | remark-q |
    table:<path>,tail=zero|hold
    """
    text = text.strip()
    head, _, rest = text.partition(":")

    if head in ("invsqrt", "inverse-sqrt", "remark-p", "remark-q") and not rest:
        return builtin("inverse-sqrt" if head == "invsqrt" else head)
    if head in ("const", "constant"):
        kv = _parse_kv(rest)
        try:
            return builtin("constant", p=float(kv["p"]))
        except (KeyError, ValueError) as e:
            raise SequenceSpecError(f"bad constant spec '{text}'") from e
    if head in ("powlaw", "power-law"):
        kv = _parse_kv(rest)
        try:
            return builtin("power-law", c=float(kv["c"]), alpha=float(kv["alpha"]))
        except (KeyError, ValueError) as e:
            if isinstance(e, SequenceSpecError):
                raise
            raise SequenceSpecError(f"bad power-law spec '{text}'") from e
    if head == "table":
        path, _, options = rest.partition(",")
        if not path:
            raise SequenceSpecError("table spec needs a path")
        kv = _parse_kv(options)
        tail = kv.get("tail", "zero")
        if tail not in ("zero", "hold"):
            raise SequenceSpecError(f"tail must be zero or hold, got '{tail}'")
        return load_table(path, tail=tail)

    raise SequenceSpecError(f"unrecognised sequence spec '{text}'")


# Diagnostics

def cross_sums(seq: SequenceLike, shifts: Iterable[int], horizon: int) -> Dict[int, float]:
    """cross(N) = sum_{n<=horizon} p_n p_{n+N} for every requested N"""
    _check_horizon(horizon)
    shifts = sorted(set(int(s) for s in shifts))
    if not shifts or shifts[0] < 1:
        raise DomainError("shifts must be positive")
    v = seq.values(horizon + shifts[-1])
    head = v[:horizon]
    return {s: math.fsum(head * v[s:s + horizon]) for s in shifts}


def cross_sum_profile(seq: SequenceLike, shifts: Sequence[int], horizons: Sequence[int]) -> pd.DataFrame:
    """cross(N) at several horizons, one row per (horizon, N)"""
    rows = []
    for horizon in horizons:
        for shift, total in cross_sums(seq, shifts, horizon).items():
            rows.append({"horizon": int(horizon), "N": shift, "cross": total})
    return pd.DataFrame(rows, columns=["horizon", "N", "cross"])


def corollary_inequality_holds(seq: SequenceLike, shift: int, horizon: int, tol: float = 1e-12) -> bool:
    """Check 2*cross(N) <= squares + shifted squares at this horizon"""
    cross = partial_sum(seq, SumMode.CROSS, horizon, shift=shift)
    bound = 0.5 * (partial_sum(seq, SumMode.SQUARES, horizon) + shifted_square_sum(seq, shift, horizon))
    return cross <= bound + tol * max(1.0, bound)


def probe_eta(seq: SequenceLike, max_shift: int, horizon: int) -> float:
    """
    max_{N <= max_shift} cross(N) / 2 at a finite horizon.

    This is a finite-horizon probe, not the limsup it stands in for.
    """
    if max_shift < 1:
        raise DomainError("max_shift must be positive")
    sums = cross_sums(seq, range(1, max_shift + 1), horizon)
    return max(sums.values()) / 2.0


class SequenceDiagnostics(BaseModel):
    """Finite-horizon summary used by the analyze command"""
    spec: str
    horizon: int
    support_min: Optional[int]
    support_gcd: Optional[int]
    gcd_certified: bool = Field(..., description="True only when the horizon gcd is 1")
    plain_sum: float
    square_sum: float
    cross_sums: Dict[int, float]
    probe_eta: float
    corollary_inequality: bool
    hints: List[str] = Field(default_factory=list)


def diagnose(seq: SequenceLike, horizon: int, max_shift: int = 10) -> SequenceDiagnostics:
    cross = cross_sums(seq, range(1, max_shift + 1), horizon)
    gcd = support_gcd(seq, horizon)
    squares = partial_sum(seq, SumMode.SQUARES, horizon)

    hints = []
    if squares > 1.0:
        hints.append(f"square sum {squares:.4g} at horizon {horizon}: block parameters for the oriented model may exist")
    best = max(cross, key=cross.get)
    if cross[best] > 0.0:
        hints.append(f"largest cross sum at N={best}: {cross[best]:.4g}")
    if gcd is not None and gcd != 1:
        hints.append(f"support gcd {gcd} within horizon; the red-site construction needs gcd 1")

    report = SequenceDiagnostics(
        spec=seq.spec_string,
        horizon=horizon,
        support_min=support_min(seq, horizon),
        support_gcd=gcd,
        gcd_certified=gcd == 1,
        plain_sum=partial_sum(seq, SumMode.PLAIN, horizon),
        square_sum=squares,
        cross_sums=cross,
        probe_eta=max(cross.values()) / 2.0,
        corollary_inequality=all(corollary_inequality_holds(seq, s, horizon) for s in cross),
        hints=hints,
    )
    logger.debug(f"Diagnosed {report.spec} at horizon {horizon}")
    return report
