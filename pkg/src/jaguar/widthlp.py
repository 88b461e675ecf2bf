"""Degree-aware submodular width via per-selector linear programs.

For every way of choosing one bag from each decomposition in the canonical
family, the inner problem maximizes the minimum chosen-bag value over all
set functions that satisfy the Shannon inequalities and the statistics
caps; the width is the maximum over selectors. The Shannon feasible region
is generated by the elemental inequalities (normalization, one
monotonicity step at the top, and single-element submodularities), which
keeps the row count near 2**n * n**2 instead of 4**n.

The solver is a dense two-phase primal simplex with Bland's rule, written
here so the optimum and its certificate can be re-verified independently
of any external package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .decompositions import (
    DEFAULT_SELECTOR_LIMIT,
    TreeDecomposition,
    bag_selectors,
    decomposition_family,
)
from .errors import LimitError, SolverError
from .frontend import ConjunctiveQuery, StatisticsSpec
from .setfunctions import SetFunction
from .varsets import Universe, VarSet

TOL = 1e-9
INF = float("inf")


@dataclass(frozen=True)
class Constraint:
    """A linear row over subset-indexed variables: sum coeffs . h <= rhs
    (or == for the normalization row)."""

    kind: str
    coeffs: tuple[tuple[int, float], ...]  # (subset mask, coefficient)
    sense: str  # "<=" or "=="
    rhs: float


def shannon_constraints(nvars: int) -> list[Constraint]:
    """Elemental generating set of the Shannon inequalities.

    Emits h({})=0, h(V minus v) <= h(V) per variable, and
    h(X+a) + h(X+b) >= h(X+ab) + h(X) for distinct a, b not in X. Together
    these generate all monotonicity and submodularity constraints.
    """
    if nvars > 12:
        raise LimitError(f"Shannon constraint generation limited to 12 vars, got {nvars}")
    full = (1 << nvars) - 1
    rows = [Constraint("normalization", ((0, 1.0),), "==", 0.0)]
    for v in range(nvars):
        rows.append(
            Constraint(
                "monotonicity",
                ((full & ~(1 << v), 1.0), (full, -1.0)),
                "<=",
                0.0,
            )
        )
    for a, b in combinations(range(nvars), 2):
        pool = [v for v in range(nvars) if v not in (a, b)]
        for bits in range(1 << len(pool)):
            x = 0
            for i, v in enumerate(pool):
                if bits >> i & 1:
                    x |= 1 << v
            xa = x | 1 << a
            xb = x | 1 << b
            xab = xa | xb
            rows.append(
                Constraint(
                    "submodularity",
                    ((xab, 1.0), (x, 1.0), (xa, -1.0), (xb, -1.0)),
                    "<=",
                    0.0,
                )
            )
    return rows


@dataclass
class LinearProgram:
    """maximize objective . x subject to rows, x >= 0."""

    n_vars: int
    objective: np.ndarray
    rows: list[tuple[np.ndarray, str, float]] = field(default_factory=list)

    def add(self, coeffs: np.ndarray, sense: str, rhs: float) -> None:
        self.rows.append((coeffs, sense, rhs))


@dataclass
class LPResult:
    status: str  # "optimal" | "unbounded"
    value: float
    assignment: Optional[np.ndarray] = None
    ray: Optional[np.ndarray] = None


def _pivot(tableau: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    column = tableau[:, col].copy()
    column[row] = 0.0
    tableau -= np.outer(column, tableau[row])
    basis[row] = col


def _price_out(tableau: np.ndarray, basis: np.ndarray, cost: np.ndarray) -> np.ndarray:
    """Reduced-cost row for the maximization objective `cost`."""
    z = cost.copy()
    for i, b in enumerate(basis):
        cb = cost[b]
        if cb:
            z -= cb * tableau[i, : len(z)]
    return z


def _bland_entering(reduced: np.ndarray, width: int) -> Optional[int]:
    for j in range(width):
        if reduced[j] > TOL:
            return j
    return None


def _bland_leaving(tableau: np.ndarray, basis: np.ndarray, col: int) -> Optional[int]:
    best: Optional[tuple[float, int, int]] = None
    for i in range(tableau.shape[0]):
        a = tableau[i, col]
        if a > TOL:
            ratio = tableau[i, -1] / a
            key = (ratio, basis[i], i)
            if best is None or key < best:
                best = key
    return best[2] if best else None


def _run_simplex(
    tableau: np.ndarray, basis: np.ndarray, cost: np.ndarray, width: int
) -> tuple[str, Optional[int]]:
    guard = 50000
    for _ in range(guard):
        reduced = _price_out(tableau, basis, cost)
        col = _bland_entering(reduced, width)
        if col is None:
            return "optimal", None
        row = _bland_leaving(tableau, basis, col)
        if row is None:
            return "unbounded", col
        _pivot(tableau, basis, row, col)
    raise SolverError("simplex did not converge within the iteration guard")


def lp_solve(lp: LinearProgram) -> LPResult:
    """Two-phase dense simplex with Bland's rule.

    Returns the optimum and a primal assignment, or unbounded status with
    a ray along which the objective grows without limit.
    """
    try:
        return _lp_solve_inner(lp)
    except SolverError as exc:
        raise SolverError(
            f"{exc} [program: {lp.n_vars} variables, {len(lp.rows)} rows, "
            f"objective support {np.flatnonzero(lp.objective).tolist()}]"
        ) from exc


def _lp_solve_inner(lp: LinearProgram) -> LPResult:
    n = lp.n_vars
    m = len(lp.rows)
    senses = [s for _, s, _ in lp.rows]
    slack_count = sum(1 for s in senses if s == "<=")
    width = n + slack_count
    a = np.zeros((m, width + 1))
    needs_artificial = []
    slack_at = n
    for i, (coeffs, sense, rhs) in enumerate(lp.rows):
        if sense not in ("<=", "=="):
            raise SolverError(f"unsupported sense {sense!r}")
        a[i, :n] = coeffs
        a[i, -1] = rhs
        if sense == "<=":
            a[i, slack_at] = 1.0
            slack_at += 1
        if rhs < 0:
            a[i] = -a[i]
        identity = sense == "<=" and rhs >= 0
        needs_artificial.append(not identity)

    artificial_cols = []
    blocks = [a[:, :width]]
    for i, needed in enumerate(needs_artificial):
        if needed:
            col = np.zeros((m, 1))
            col[i, 0] = 1.0
            blocks.append(col)
            artificial_cols.append(width + len(artificial_cols))
    tableau = np.hstack(blocks + [a[:, -1:]])
    total = width + len(artificial_cols)

    basis = np.zeros(m, dtype=int)
    slack_at = n
    art_at = width
    for i, needed in enumerate(needs_artificial):
        if needed:
            basis[i] = art_at
            art_at += 1
        else:
            basis[i] = slack_at
        if senses[i] == "<=":
            slack_at += 1

    if artificial_cols:
        phase1 = np.zeros(total)
        phase1[artificial_cols] = -1.0  # maximize -(sum of artificials)
        status, _ = _run_simplex(tableau, basis, phase1, total)
        infeasibility = -float(phase1 @ _basic_solution(tableau, basis, total))
        if status != "optimal" or infeasibility > 1e-7:
            raise SolverError("LP infeasible; the width program should never be")
        art_set = set(artificial_cols)
        drop_rows = []
        for i in range(m):
            if basis[i] in art_set:
                pivot_col = next(
                    (j for j in range(width) if abs(tableau[i, j]) > TOL), None
                )
                if pivot_col is not None:
                    _pivot(tableau, basis, i, pivot_col)
                else:
                    drop_rows.append(i)  # redundant constraint
        keep_rows = [i for i in range(m) if i not in drop_rows]
        keep_cols = [j for j in range(total) if j not in art_set] + [total]
        tableau = tableau[np.ix_(keep_rows, keep_cols)]
        remap = {old: new for new, old in enumerate(keep_cols[:-1])}
        basis = np.array([remap[basis[i]] for i in keep_rows], dtype=int)
        m = len(keep_rows)
        total = width

    cost = np.zeros(total)
    cost[:n] = lp.objective
    status, entering = _run_simplex(tableau, basis, cost, total)
    x = _basic_solution(tableau, basis, total)[:n]
    if status == "unbounded":
        ray = np.zeros(total)
        ray[entering] = 1.0
        for i, b in enumerate(basis):
            ray[b] = -tableau[i, entering]
        return LPResult("unbounded", INF, assignment=x, ray=ray[:n])
    return LPResult("optimal", float(lp.objective @ x), assignment=x)


def _basic_solution(tableau: np.ndarray, basis: np.ndarray, total: int) -> np.ndarray:
    x = np.zeros(total)
    for i, b in enumerate(basis):
        x[b] = tableau[i, -1]
    return x


def _var(mask: int) -> int:
    # h variables are indexed mask-1 (the empty set is pinned to zero),
    # with the auxiliary minimum t as the last variable
    return mask - 1


def build_selector_lp(
    universe_size: int,
    selector_masks: Sequence[int],
    stats: StatisticsSpec,
) -> LinearProgram:
    n_h = (1 << universe_size) - 1
    t = n_h
    objective = np.zeros(n_h + 1)
    objective[t] = 1.0
    lp = LinearProgram(n_h + 1, objective)

    for con in shannon_constraints(universe_size):
        if con.kind == "normalization":
            continue
        row = np.zeros(n_h + 1)
        for mask, coeff in con.coeffs:
            if mask:
                row[_var(mask)] += coeff
        lp.add(row, con.sense, con.rhs)

    for term in stats:
        union = term.union_mask
        row = np.zeros(n_h + 1)
        if union:
            row[_var(union)] += 1.0
        if term.given.mask:
            row[_var(term.given.mask)] -= 1.0
        lp.add(row, "<=", term.exponent)

    for mask in sorted(set(selector_masks)):
        row = np.zeros(n_h + 1)
        row[t] = 1.0
        if mask:
            row[_var(mask)] -= 1.0
        lp.add(row, "<=", 0.0)
    return lp


def solve_selector_lp(
    selector: Sequence[VarSet],
    stats: StatisticsSpec,
    universe: Universe,
) -> tuple[float, Optional[SetFunction], Optional[np.ndarray]]:
    """Optimum of the inner max-min problem for one bag selector.

    Returns (value, certificate set function, ray); the ray is populated
    instead of the certificate when the program is unbounded, which
    happens exactly when the statistics fail to cap some direction.
    """
    nvars = len(universe)
    lp = build_selector_lp(nvars, [b.mask for b in selector], stats)
    result = lp_solve(lp)
    if result.status == "unbounded":
        ray = np.zeros(1 << nvars)
        ray[1:] = result.ray[:-1]
        return INF, None, ray
    values = np.zeros(1 << nvars)
    values[1:] = result.assignment[:-1]
    return result.value, SetFunction(universe, values), None


@dataclass
class SubwResult:
    value: float
    selector: Optional[tuple[VarSet, ...]]
    certificate: Optional[SetFunction]
    ray: Optional[np.ndarray] = None
    complete: bool = True

    def __float__(self) -> float:
        return self.value


def subw(
    query: ConjunctiveQuery,
    stats: StatisticsSpec,
    selector_limit: int = DEFAULT_SELECTOR_LIMIT,
    family: Optional[Sequence[TreeDecomposition]] = None,
    stop_at: Optional[float] = None,
) -> SubwResult:
    """Max over bag selectors of the per-selector optimum.

    With stop_at set, enumeration stops early once the running maximum
    reaches it; the result is then a certified lower bound (complete is
    False) which is all the engine-coupling check needs.
    """
    if family is None:
        family = decomposition_family(query)
    try:
        selectors = bag_selectors(family, selector_limit)
        truncated = False
    except LimitError:
        selectors = _limited_selectors(family, selector_limit)
        truncated = True

    order = sorted(
        range(len(selectors)),
        key=lambda i: (-sum(len(b) for b in selectors[i]), i),
    )
    best = SubwResult(-INF, None, None, complete=not truncated)
    for i in order:
        selector = selectors[i]
        value, certificate, ray = solve_selector_lp(selector, stats, query.universe)
        if value > best.value:
            best = SubwResult(
                value, selector, certificate, ray=ray, complete=best.complete
            )
        if math.isinf(best.value):
            break
        if stop_at is not None and best.value >= stop_at:
            best.complete = False
            break
    return best


def _limited_selectors(
    family: Sequence[TreeDecomposition], limit: int
) -> list[tuple[VarSet, ...]]:
    """First `limit` selectors in product order; documented fallback when
    the full product is out of reach."""
    out: list[tuple[VarSet, ...]] = []
    counts = [len(td.bags) for td in family]
    idx = [0] * len(family)
    while len(out) < limit:
        out.append(tuple(td.bags[i] for td, i in zip(family, idx)))
        at = len(family) - 1
        while at >= 0:
            idx[at] += 1
            if idx[at] < counts[at]:
                break
            idx[at] = 0
            at -= 1
        if at < 0:
            break
    return out
