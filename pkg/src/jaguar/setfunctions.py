"""Set functions on the subset lattice and the truncation construction.

A SetFunction maps every subset of the universe to a nonnegative real or
infinity, stored densely as a numpy array indexed by subset encoding. The
module provides the log-size initialization from an instance, the
submodularity-violation scan that guides the engine, truncation at the
lowest violation level (which yields a polymatroid), the exhaustive
polymatroid checker, and statistics satisfaction with the documented
infinity conventions.

All real comparisons use an absolute tolerance of 1e-9; "strictly greater"
means greater by more than the tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import InvariantError, LimitError
from .frontend import StatisticsSpec
from .relations import DatabaseInstance
from .varsets import Universe, VarSet

TOL = 1e-9
INF = float("inf")


@lru_cache(maxsize=16)
def _pair_tables(nvars: int):
    """Index arrays over all ordered subset pairs: X, Y, X&Y, X|Y."""
    if nvars > 12:
        raise LimitError(f"exhaustive pair scan limited to 12 variables, got {nvars}")
    size = 1 << nvars
    xs = np.repeat(np.arange(size, dtype=np.int32), size)
    ys = np.tile(np.arange(size, dtype=np.int32), size)
    return xs, ys, xs & ys, xs | ys


class SetFunction:
    """Dense total map from subset encodings to values in [0, inf]."""

    __slots__ = ("universe", "values")

    def __init__(self, universe: Universe, values: np.ndarray):
        size = 1 << len(universe)
        if values.shape != (size,):
            raise InvariantError(f"expected {size} entries, got {values.shape}")
        self.universe = universe
        self.values = values

    @classmethod
    def constant(cls, universe: Universe, value: float) -> "SetFunction":
        return cls(universe, np.full(1 << len(universe), value, dtype=float))

    def copy(self) -> "SetFunction":
        return SetFunction(self.universe, self.values.copy())

    def __getitem__(self, key) -> float:
        mask = key.mask if isinstance(key, VarSet) else key
        return float(self.values[mask])

    def updated(self, key, value: float) -> "SetFunction":
        """A copy with one entry replaced."""
        mask = key.mask if isinstance(key, VarSet) else key
        values = self.values.copy()
        values[mask] = value
        return SetFunction(self.universe, values)

    def __len__(self) -> int:
        return len(self.values)

    def allclose(self, other: "SetFunction", tol: float = TOL) -> bool:
        a, b = self.values, other.values
        both_inf = np.isinf(a) & np.isinf(b)
        with np.errstate(invalid="ignore"):
            return bool(np.all(both_inf | (np.abs(a - b) <= tol)))

    def is_monotone(self, tol: float = TOL) -> bool:
        v = self.values
        for i in range(len(self.universe)):
            bit = 1 << i
            lo = np.arange(len(v))
            with_bit = lo | bit
            if np.any(v[lo] > v[with_bit] + tol):
                return False
        return True

    def finite_masks(self) -> list[int]:
        return [int(m) for m in np.flatnonzero(np.isfinite(self.values))]

    def to_json_dict(self) -> dict[str, object]:
        """Map from comma-joined variable names to numbers, inf as "inf"."""
        out: dict[str, object] = {}
        for mask in range(len(self.values)):
            v = float(self.values[mask])
            key = ",".join(self.universe.mask_names(mask))
            out[key] = "inf" if math.isinf(v) else v
        return out

    def __repr__(self) -> str:
        finite = int(np.isfinite(self.values).sum())
        return f"SetFunction({len(self.universe)} vars, {finite} finite entries)"


@dataclass
class TruncationResult:
    """Outcome of the lowest-violation scan and the induced truncation.

    c is the smallest value of g(X)+g(Y)-g(X&Y) over pairs where g(X|Y)
    strictly exceeds it (inf when no pair violates submodularity); the
    witness is the first such pair under the deterministic order. h and
    low_masks are filled by truncate().
    """

    c: float
    witness: Optional[tuple[VarSet, VarSet]]
    h: Optional[SetFunction] = None
    low_masks: Optional[frozenset[int]] = None


def init_g(instance: DatabaseInstance, total_size: int) -> SetFunction:
    """Log-size seed: log_N |R(X)| where a relation over X exists, else inf.

    Satisfies the cardinality invariant only; monotonicity and statistics
    are repaired by calibration. Empty relations must be short-circuited
    by the caller before this point.
    """
    if total_size < 2:
        raise InvariantError("set-function initialization needs total size >= 2")
    universe = instance.universe
    values = np.full(1 << len(universe), INF)
    log_n = math.log(total_size)
    for mask in sorted(instance.relations):
        count = len(instance.relations[mask])
        if count == 0:
            raise InvariantError(
                "empty relation reached set-function initialization; "
                "the engine must short-circuit first"
            )
        values[mask] = math.log(count) / log_n
    return SetFunction(universe, values)


def f_value(g: SetFunction, x: VarSet, y: VarSet) -> float:
    """g(X) + g(Y) - g(X&Y) with the infinity guards.

    Returns inf when g(X) or g(Y) is inf. Under monotone g the
    intersection entry is then finite whenever both operands are.
    """
    gx = g[x]
    gy = g[y]
    if math.isinf(gx) or math.isinf(gy):
        return INF
    return gx + gy - g[x & y]


def _violation_arrays(g: SetFunction):
    xs, ys, ands, ors = _pair_tables(len(g.universe))
    v = g.values
    gx = v[xs]
    gy = v[ys]
    finite = np.isfinite(gx) & np.isfinite(gy)
    f = np.full(len(xs), INF)
    f[finite] = gx[finite] + gy[finite] - v[ands[finite]]
    violated = v[ors] > f + TOL
    return xs, ys, ors, f, violated


def min_violation(g: SetFunction) -> TruncationResult:
    """Smallest submodularity violation of g and its first witness pair.

    The scan covers all ordered pairs; ties on the minimal value break by
    ascending encoding of the union, then of X, then of Y. Returns c=inf
    and no witness when g has no violation.
    """
    xs, ys, ors, f, violated = _violation_arrays(g)
    if not violated.any():
        return TruncationResult(INF, None)
    c = float(f[violated].min())
    candidates = np.flatnonzero(violated & (f == c))
    order = np.lexsort((ys[candidates], xs[candidates], ors[candidates]))
    best = candidates[order[0]]
    witness = (
        g.universe.from_mask(int(xs[best])),
        g.universe.from_mask(int(ys[best])),
    )
    return TruncationResult(c, witness)


def truncate(g: SetFunction) -> TruncationResult:
    """Cap g at its lowest violation level c.

    Requires g monotone with g({})=0. The result h = min(g, c) is a
    polymatroid with h <= g and h <= c, and low_masks collects the subsets
    where g itself stays at or below c.
    """
    if abs(g[0]) > TOL:
        raise InvariantError("truncation requires g({}) = 0")
    if not g.is_monotone():
        raise InvariantError("truncation requires a monotone g")
    result = min_violation(g)
    capped = np.minimum(g.values, result.c)
    result.h = SetFunction(g.universe, capped)
    result.low_masks = frozenset(
        int(m) for m in np.flatnonzero(g.values <= result.c + TOL)
    )
    return result


def low_set_size(g: SetFunction, c: float) -> int:
    """|{X : g(X) <= c}| with tolerance; used by the recursion trace."""
    return int(np.count_nonzero(g.values <= c + TOL))


@dataclass(frozen=True)
class PolymatroidReport:
    ok: bool
    kind: Optional[str] = None  # "normalization" | "monotonicity" | "submodularity"
    first: Optional[tuple[VarSet, VarSet]] = None

    def __bool__(self) -> bool:
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return "polymatroid"
        if self.kind == "normalization":
            return "value at {} is not 0"
        x, y = self.first
        if self.kind == "monotonicity":
            return f"monotonicity fails at {x!r} <= {y!r}"
        return f"submodularity fails at ({x!r}, {y!r})"


def check_polymatroid(h: SetFunction, tol: float = TOL) -> PolymatroidReport:
    """Exhaustive Shannon verification: normalization, every subset pair
    for monotonicity, every ordered pair for submodularity.

    On failure reports the first violated inequality: monotonicity by
    ascending pair encoding, submodularity by the lowest-violation order
    (the same order the engine's guided search uses).
    """
    if abs(h[0]) > tol:
        return PolymatroidReport(False, "normalization")
    v = h.values
    xs, ys, ands, ors = _pair_tables(len(h.universe))
    subset_pairs = (xs & ~ys) == 0
    mono_bad = subset_pairs & (v[xs] > v[ys] + tol)
    if mono_bad.any():
        idx = np.flatnonzero(mono_bad)
        order = np.lexsort((ys[idx], xs[idx]))
        first = idx[order[0]]
        return PolymatroidReport(
            False,
            "monotonicity",
            (h.universe.from_mask(int(xs[first])), h.universe.from_mask(int(ys[first]))),
        )
    sub = min_violation(h)
    if sub.witness is not None:
        return PolymatroidReport(False, "submodularity", sub.witness)
    return PolymatroidReport(True)


def satisfies_stats(g: SetFunction, stats: StatisticsSpec, tol: float = TOL) -> bool:
    """Term-wise check of g(targets|given) <= exponent.

    Infinity conventions: fails when g at the union is inf while g at the
    condition is finite; holds when the union is finite and the condition
    is inf; the both-inf case is treated as satisfied (documented reading
    of an underspecified corner).
    """
    for term in stats:
        gu = g[term.union_mask]
        gx = g[term.given.mask]
        if math.isinf(gu):
            if math.isinf(gx):
                continue
            return False
        if math.isinf(gx):
            continue
        if gu - gx > term.exponent + tol:
            return False
    return True
