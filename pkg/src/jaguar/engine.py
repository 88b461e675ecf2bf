"""Adaptive, violation-guided evaluation of conjunctive queries.

The evaluator keeps a set function g describing the current instance on a
log base N scale (N is the size of the original input and never changes
across recursion). At each step it either finishes through a covered tree
decomposition with a semijoin-reduce-then-join pass, or it finds the
lowest submodularity violation of g, splits the witnessing relation into
heavy and light parts by conditional degree, spreads the light part over
equal-degree chunks so each chunked join stays within the N**c budget, and
recurses: light branches inherit g with the repaired entry, the heavy
branch restarts g from scratch. Results are unioned into one globally
deduplicated answer set.

Every recursion node is recorded in a trace that carries enough detail to
re-check the budget and shape invariants offline: the violation level c
and its witness, the degree threshold, partition sizes, the potential of
the instance at entry, and the per-node join work.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Iterator, Optional

from .calibration import WorkMeter, calibrate
from .decompositions import (
    DEFAULT_MAX_VARS,
    TreeDecomposition,
    covers,
    decomposition_family,
)
from .errors import InvariantError, LimitError, SchemaError, ValidationError
from .frontend import (
    ConjunctiveQuery,
    StatisticsSpec,
    check_matches_schema,
    instance_satisfies,
)
from .generators import brute_force
from .relations import AnswerSet, DatabaseInstance, Relation, join, project, semijoin
from .setfunctions import INF, SetFunction, init_g, low_set_size, min_violation
from .varsets import Universe, VarSet


def _env_max_vars(default: int = DEFAULT_MAX_VARS) -> int:
    raw = os.environ.get("JAGUAR_MAX_VARS")
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"JAGUAR_MAX_VARS must be an integer, got {raw!r}")


@dataclass
class EngineConfig:
    """Evaluation knobs; epsilon is the branching-granularity exponent."""

    epsilon: float = 0.5
    max_vars: Optional[int] = None  # None: env JAGUAR_MAX_VARS or 12
    max_depth: Optional[int] = None  # None: derived from the depth claims
    trace: bool = True
    classic_stats: bool = False
    oracle_budget: float = 1e12

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")

    def resolved_max_vars(self) -> int:
        return self.max_vars if self.max_vars is not None else _env_max_vars()


@dataclass(slots=True)
class TraceNode:
    id: int
    parent: Optional[int]
    edge: str  # "root" | "light" | "heavy"
    light_index: Optional[int]
    depth: int
    phi: float = 0.0
    status: str = "branch"  # "branch" | "leaf_td" | "leaf_empty" | "fallback"
    c: Optional[float] = None
    x_mask: Optional[int] = None
    y_mask: Optional[int] = None
    w_mask: Optional[int] = None
    theta: Optional[float] = None
    tau: Optional[float] = None
    heavy_size: Optional[int] = None
    light_size: Optional[int] = None
    part_sizes: Optional[tuple[int, ...]] = None
    i_size: Optional[int] = None
    join_out: Optional[int] = None
    terminal_td: Optional[int] = None
    work: int = 0


class RecursionTrace:
    """Tree-shaped record of one evaluation."""

    def __init__(self, universe: Universe, epsilon: float, total_size: int):
        self.universe = universe
        self.epsilon = epsilon
        self.total_size = total_size
        self.nodes: list[TraceNode] = []

    def add(self, node: TraceNode) -> TraceNode:
        self.nodes.append(node)
        return node

    def by_id(self) -> dict[int, TraceNode]:
        return {n.id: n for n in self.nodes}

    def children(self) -> dict[Optional[int], list[TraceNode]]:
        out: dict[Optional[int], list[TraceNode]] = {}
        for n in self.nodes:
            out.setdefault(n.parent, []).append(n)
        for siblings in out.values():
            siblings.sort(key=lambda n: n.id)
        return out

    def branching_nodes(self) -> list[TraceNode]:
        return [n for n in self.nodes if n.status == "branch"]

    def max_light_run(self) -> int:
        runs: dict[int, int] = {}
        best = 0
        for n in self.nodes:  # parents precede children (pre-order ids)
            run = runs.get(n.parent, 0) + 1 if n.edge == "light" else 0
            runs[n.id] = run
            best = max(best, run)
        return best

    def light_edges(self) -> Iterator[tuple[TraceNode, TraceNode]]:
        index = self.by_id()
        for n in self.nodes:
            if n.edge == "light":
                yield index[n.parent], n

    def heavy_chain_pairs(self) -> Iterator[tuple[TraceNode, TraceNode]]:
        """(previous restart node, heavy node) pairs along every path.

        The root initializes g the same way a heavy call does, so it
        anchors the first pair on each path.
        """
        index = self.by_id()
        for n in self.nodes:
            if n.edge != "heavy":
                continue
            anc = index.get(n.parent)
            while anc is not None and anc.edge == "light":
                anc = index.get(anc.parent)
            if anc is not None:
                yield anc, n

    def max_heavy_edges_per_path(self) -> int:
        counts: dict[int, int] = {}
        best = 0
        for n in self.nodes:
            base = counts.get(n.parent, 0)
            count = base + (1 if n.edge == "heavy" else 0)
            counts[n.id] = count
            best = max(best, count)
        return best

    def budget_checks(self) -> Iterator[tuple[TraceNode, TraceNode]]:
        """(parent, light child) pairs for re-checking line-level join sizes."""
        yield from self.light_edges()

    def to_json_obj(self) -> dict:
        def names(mask: Optional[int]):
            return None if mask is None else list(self.universe.mask_names(mask))

        nodes = []
        for n in sorted(self.nodes, key=lambda n: n.id):
            c: object
            if n.c is None:
                c = None
            elif math.isinf(n.c):
                c = "inf"
            else:
                c = n.c
            nodes.append(
                {
                    "id": n.id,
                    "parent": n.parent,
                    "edge": n.edge,
                    "light_index": n.light_index,
                    "c": c,
                    "X": names(n.x_mask),
                    "Y": names(n.y_mask),
                    "W": names(n.w_mask),
                    "theta": n.theta,
                    "I_size": n.i_size,
                    "join_out": n.join_out,
                    "terminal_td": n.terminal_td,
                }
            )
        return {"nodes": nodes}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())


def snap_ceil(x: float) -> int:
    """Ceiling that forgives sub-tolerance float noise above an integer."""
    nearest = round(x)
    if abs(x - nearest) < 1e-9:
        return int(nearest)
    return math.ceil(x)


def snap_floor(x: float) -> int:
    """Floor that forgives sub-tolerance float noise below an integer."""
    nearest = round(x)
    if abs(x - nearest) < 1e-9:
        return int(nearest)
    return math.floor(x)


def potential(instance: DatabaseInstance, total_size: int, universe_size: int) -> float:
    """Progress measure for heavy restarts: present relations contribute
    their log size, absent schemas contribute universe_size + 1 each."""
    if total_size < 2:
        raise InvariantError("potential needs total size >= 2")
    log_n = math.log(total_size)
    value = 0.0
    present = 0
    for rel in instance.relations.values():
        present += 1
        value += math.log(len(rel)) / log_n if len(rel) else -INF
    value += ((1 << universe_size) - present) * (universe_size + 1)
    return value


def heavy_light_partition(
    rel: Relation, on: VarSet, tau: float
) -> tuple[Relation, Relation]:
    """Split rows by whether their group on `on` has more than tau rows."""
    if not on.issubset(rel.schema):
        raise SchemaError(f"partition variables {on!r} not within {rel.schema!r}")
    if tau < 0:
        raise ValidationError("threshold must be nonnegative")
    heavy: list = []
    light: list = []
    for rows in rel.groups(on).values():
        (heavy if len(rows) > tau else light).extend(rows)
    return Relation(rel.schema, heavy), Relation(rel.schema, light)


def equal_degree_partition(
    rel: Relation, on: VarSet, theta: float, parts: int, chunk: Optional[int] = None
) -> list[Relation]:
    """Cut every group into equal chunks, chunk j to part j.

    The default chunk is floor(theta), which keeps every part's per-group
    degree at or below theta itself (what the downstream join budget
    charges for). Callers that know the actual relation sizes may pass a
    coarser chunk whose product with the probe side still meets the same
    budget. The caller sizes `parts` so that the largest group fits.
    """
    if parts < 1:
        raise ValidationError("need at least one part")
    if chunk is None:
        chunk = max(1, snap_floor(theta))
    buckets: list[list] = [[] for _ in range(parts)]
    for key in sorted(rel.groups(on)):
        rows = sorted(rel.groups(on)[key])
        needed = (len(rows) + chunk - 1) // chunk
        if needed > parts:
            raise InvariantError(
                f"group of {len(rows)} rows does not fit {parts} parts of {chunk}"
            )
        for j in range(needed):
            buckets[j].extend(rows[j * chunk : (j + 1) * chunk])
    return [
        Relation(rel.schema, b) if b else Relation.empty(rel.schema) for b in buckets
    ]


def _memo_semijoin(memo: Optional[dict], rel: Relation, other: Relation) -> Relation:
    """Semijoin with an identity-keyed memo.

    Deep recursion re-reduces the same relation objects against the same
    reducers at thousands of sibling leaves; caching per object pair makes
    each distinct reduction chain pay only once. Strong references in the
    memo keep ids stable for its (per-evaluation) lifetime.
    """
    if memo is None:
        return semijoin(rel, other)
    key = (id(rel), id(other))
    hit = memo.get(key)
    if hit is not None and hit[0] is rel and hit[1] is other:
        return hit[2]
    result = semijoin(rel, other)
    if len(memo) < 500_000:
        memo[key] = (rel, other, result)
    return result


def yannakakis(
    td: TreeDecomposition,
    instance: DatabaseInstance,
    free: VarSet,
    meter: Optional[WorkMeter] = None,
    memo: Optional[dict] = None,
) -> frozenset:
    """Finish through a covered decomposition.

    Every bag relation is first semijoin-reduced against every relation in
    the instance (this is what keeps spurious tuples produced by earlier
    branching out of the answer), then fully reduced along the tree, and
    finally the witness bags are joined and projected onto the free
    variables. The final assembly join is counted separately from the
    reduction work because its size is bounded by the output.
    """
    bags: list[Relation] = []
    for bag in td.bags:
        rel = instance.get(bag)
        if rel is None:
            raise SchemaError(f"decomposition bag {bag!r} is not covered by the instance")
        bags.append(rel)

    # oldest relations first: reduction order does not change the outcome
    # (each filter tests against its own reducer only), but stable prefixes
    # across sibling branches make the memo effective
    reducers = [
        instance.relations[m]
        for m in sorted(instance.relations, key=lambda m: (instance.versions.get(m, 0), m))
    ]
    for i, bag in enumerate(td.bags):
        for reducer in reducers:
            # disjoint nonempty reducers and the bag itself cannot filter anything
            if reducer.rows and (
                reducer.schema.mask & bag.mask == 0
                or reducer.schema.mask == bag.mask
            ):
                continue
            bags[i] = _memo_semijoin(memo, bags[i], reducer)
            if meter is not None:
                meter.produced += len(bags[i])

    order, parent = _bfs_order(td, root=0)
    for node in reversed(order):
        p = parent[node]
        if p is not None:
            bags[p] = _memo_semijoin(memo, bags[p], bags[node])
            if meter is not None:
                meter.produced += len(bags[p])
    for node in order:
        p = parent[node]
        if p is not None:
            bags[node] = _memo_semijoin(memo, bags[node], bags[p])
            if meter is not None:
                meter.produced += len(bags[node])

    if any(len(b) == 0 for b in bags):
        return frozenset()
    if not free:
        return frozenset({()})

    core_order = _core_bfs(td, set(td.free_core))
    acc = bags[core_order[0]]
    for node in core_order[1:]:
        acc = join(acc, bags[node])
        if meter is not None:
            meter.assembly += len(acc)
    result = project(acc, free)
    if meter is not None and result is not acc:
        meter.assembly += len(result)
    return result.rows


def _bfs_order(td: TreeDecomposition, root: int) -> tuple[list[int], list[Optional[int]]]:
    adjacency = td.adjacency()
    parent: list[Optional[int]] = [None] * len(td.bags)
    order = [root]
    seen = {root}
    at = 0
    while at < len(order):
        cur = order[at]
        at += 1
        for nxt in adjacency[cur]:
            if nxt not in seen:
                seen.add(nxt)
                parent[nxt] = cur
                order.append(nxt)
    return order, parent


def _core_bfs(td: TreeDecomposition, core: set[int]) -> list[int]:
    adjacency = td.adjacency()
    root = min(core)
    order = [root]
    seen = {root}
    at = 0
    while at < len(order):
        cur = order[at]
        at += 1
        for nxt in adjacency[cur]:
            if nxt in core and nxt not in seen:
                seen.add(nxt)
                order.append(nxt)
    if len(order) != len(core):
        raise InvariantError("free-connex witness is not connected")
    return order


@dataclass(slots=True)
class _Pending:
    id: int
    parent: Optional[int]
    edge: str
    light_index: Optional[int]
    depth: int
    instance: Optional[DatabaseInstance]  # None: born with an empty relation
    g: Optional[SetFunction]
    join_out: Optional[int]


def evaluate(
    query: ConjunctiveQuery,
    stats: StatisticsSpec,
    instance: DatabaseInstance,
    config: Optional[EngineConfig] = None,
    meter: Optional[WorkMeter] = None,
) -> tuple[AnswerSet, RecursionTrace]:
    """Evaluate the query over an instance that matches its schema.

    The instance must satisfy the statistics. Degenerate inputs (total
    size below 2, or an empty base relation) bypass the main loop and fall
    back to the brute-force path, whose answer is trivially correct.
    """
    config = config or EngineConfig()
    universe = query.universe
    nvars = len(universe)
    if nvars > config.resolved_max_vars():
        raise LimitError(
            f"query has {nvars} variables, limit is {config.resolved_max_vars()}"
        )
    check_matches_schema(query, instance)
    total_size = instance.size
    epsilon = config.epsilon
    trace = RecursionTrace(universe, epsilon, total_size)

    if total_size <= 1 or instance.has_empty_relation():
        rows = brute_force(query, instance, budget=config.oracle_budget).rows
        if config.trace:
            trace.add(
                TraceNode(0, None, "root", None, 0, status="fallback")
            )
        return AnswerSet(universe, query.free, rows), trace

    if not instance_satisfies(instance, stats):
        raise ValidationError("instance does not satisfy the supplied statistics")

    family = decomposition_family(query, config.resolved_max_vars())
    meter = meter if meter is not None else WorkMeter()
    parts_count = snap_ceil(total_size**epsilon)

    phi_start = potential(instance, total_size, nvars)
    if config.max_depth is not None:
        depth_guard = config.max_depth
    else:
        depth_guard = (1 << nvars) * (math.ceil(phi_start / epsilon) + 1) + 8

    answers: set = set()
    semijoin_memo: dict = {}
    next_id = 1
    stack: list[_Pending] = [
        _Pending(0, None, "root", None, 0, instance, None, None)
    ]
    while stack:
        pending = stack.pop()
        node_instance = pending.instance
        node = TraceNode(
            pending.id,
            pending.parent,
            pending.edge,
            pending.light_index,
            pending.depth,
            join_out=pending.join_out,
        )
        if config.trace:
            trace.add(node)
        if pending.depth > depth_guard:
            raise InvariantError(
                f"recursion depth {pending.depth} exceeded the guard {depth_guard}; "
                "the shape invariants promise this is unreachable"
            )
        if node_instance is None or node_instance.has_empty_relation():
            # an empty relation zeroes the branch and drives the potential to -inf
            node.phi = -INF
            node.status = "leaf_empty"
            continue
        node.phi = potential(node_instance, total_size, nvars)

        work_before = meter.produced
        g = pending.g
        if g is None:
            g = init_g(node_instance, total_size)
            node_instance, g = calibrate(stats, node_instance, g, total_size, meter=meter)

        terminal = None
        available = node_instance.schema_masks()
        for idx, td in enumerate(family):
            if covers(available, td):
                terminal = idx
                break
        if terminal is not None:
            rows = yannakakis(
                family[terminal], node_instance, query.free,
                meter=meter, memo=semijoin_memo,
            )
            answers.update(rows)
            node.status = "leaf_td"
            node.terminal_td = terminal
            node.work = meter.produced - work_before
            continue

        violation = min_violation(g)
        if violation.witness is None:
            raise InvariantError(
                "no violation found at a non-covered node; the cardinality "
                "invariant should force coverage when g is a polymatroid"
            )
        c = violation.c
        x_set, y_set = violation.witness
        w_set = x_set & y_set
        if math.isinf(g[x_set]) or math.isinf(g[y_set]):
            raise InvariantError("violation witness has an infinite entry")
        rel_x = node_instance.get(x_set)
        rel_y = node_instance.get(y_set)
        if rel_x is None or rel_y is None:
            raise InvariantError(
                "cardinality invariant broken: finite g entry without a relation"
            )
        theta = max(1.0, total_size ** (g[y_set] - g[w_set]))
        tau = theta * total_size**epsilon

        heavy, light = heavy_light_partition(rel_y, w_set, tau)
        parts = equal_degree_partition(
            light, w_set, theta, parts_count, chunk=max(1, snap_ceil(theta))
        )

        node.status = "branch"
        node.c = c
        node.x_mask = x_set.mask
        node.y_mask = y_set.mask
        node.w_mask = w_set.mask
        node.theta = theta
        node.tau = tau
        node.heavy_size = len(heavy)
        node.light_size = len(light)
        node.i_size = low_set_size(g, c)

        union_set = x_set | y_set
        budget = total_size**c * (1 + 1e-9)

        # First-pass parts have per-group degree up to ceil(theta); a join
        # that actually overflows N**c would poison the lowered g entry, so
        # such parts are split once more down to floor(theta), which provably
        # fits the budget. Almost no part overflows in practice, keeping the
        # fan-out at ceil(N**epsilon) plus the occasional extra sibling.
        final_parts: list[Relation] = []
        joins: list[Optional[Relation]] = []
        for part in parts:
            if not part.rows:
                final_parts.append(part)
                joins.append(None)
                continue
            joined = meter.add(join(rel_x, part))
            if len(joined) <= budget:
                final_parts.append(part)
                joins.append(joined)
                continue
            for sub in equal_degree_partition(
                part, w_set, theta, 2, chunk=max(1, snap_floor(theta))
            ):
                sub_join = meter.add(join(rel_x, sub))
                if len(sub_join) > budget:
                    raise InvariantError(
                        "join exceeds its budget even at the floored degree cap; "
                        "the cardinality invariant must have broken upstream"
                    )
                final_parts.append(sub)
                joins.append(sub_join)

        node.part_sizes = tuple(len(p) for p in final_parts)
        children: list[_Pending] = []
        depth = pending.depth + 1
        for i, joined in enumerate(joins, start=1):
            if joined is None or not joined.rows:
                # an empty join dead-ends immediately; record the leaf in place
                if config.trace:
                    trace.add(
                        TraceNode(
                            next_id, pending.id, "light", i, depth,
                            phi=-INF, status="leaf_empty", join_out=0,
                        )
                    )
                next_id += 1
                continue
            child_instance = node_instance.augment(joined, derived=True)
            g_light = g.updated(union_set, c)
            # g was calibrated at this node and only the union entry moved,
            # so its improvements are the only ones to propagate
            child_instance, child_g = calibrate(
                stats, child_instance, g_light, total_size,
                meter=meter, seed_mask=union_set.mask,
            )
            children.append(
                _Pending(
                    next_id, pending.id, "light", i, depth,
                    child_instance, child_g, len(joined),
                )
            )
            next_id += 1

        w_proj = meter.add(project(heavy, w_set))
        if not w_proj.rows:
            if config.trace:
                trace.add(
                    TraceNode(
                        next_id, pending.id, "heavy", None, depth,
                        phi=-INF, status="leaf_empty", join_out=0,
                    )
                )
            next_id += 1
        else:
            children.append(
                _Pending(
                    next_id, pending.id, "heavy", None, depth,
                    node_instance.augment(w_proj, derived=True), None, len(w_proj),
                )
            )
            next_id += 1
        node.work = meter.produced - work_before
        stack.extend(reversed(children))

    return AnswerSet(universe, query.free, answers), trace


def baseline_single_td(
    query: ConjunctiveQuery,
    instance: DatabaseInstance,
    td: TreeDecomposition,
    meter: Optional[WorkMeter] = None,
) -> AnswerSet:
    """Materialize each bag of one fixed decomposition by joining the base
    relations it covers, then run the reduce-and-join finish over it.

    This is the single-decomposition baseline the adaptive engine is
    measured against; on skewed inputs its bag materialization is the
    quadratic step.
    """
    check_matches_schema(query, instance)
    assigned: dict[int, list[Relation]] = {i: [] for i in range(len(td.bags))}
    for name, schema in query.atoms:
        home = None
        for i, bag in enumerate(td.bags):
            if schema.issubset(bag):
                home = i
                break
        if home is None:
            raise ValidationError(f"atom {name} fits no bag of the decomposition")
        assigned[home].append(instance.get(schema))

    augmented = instance
    for i, bag in enumerate(td.bags):
        rels = assigned[i]
        if not rels:
            raise ValidationError(f"bag {bag!r} covers no atom; baseline undefined")
        acc = rels[0]
        for rel in rels[1:]:
            acc = join(acc, rel)
            if meter is not None:
                meter.produced += len(acc)
        if acc.schema != bag:
            raise ValidationError(
                f"atoms assigned to bag {bag!r} only span {acc.schema!r}"
            )
        augmented = augmented.augment(acc, derived=True)

    rows = yannakakis(td, augmented, query.free, meter=meter)
    return AnswerSet(query.universe, query.free, rows)
