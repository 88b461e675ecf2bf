"""Canonical free-connex tree decompositions of a query.

The family is data-independent and computed once per query: every vertex
elimination ordering of the query's primal graph yields the maximal bags
of a chordal completion, orderings are deduplicated by resulting bag set,
and a join tree is built over the bags. For queries whose free variables
are a proper nonempty subset, only orderings that eliminate all bound
variables before any free variable are considered, and candidates without
a valid witness subtree over the free variables are discarded. The family
always ends with the fallback decomposition over bags {F, V} (the single
bag V when F is empty or all of V), so coverage can always eventually
succeed. Cost grows factorially with the variable count; the default
limit is 12 variables.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import InvariantError, LimitError
from .frontend import ConjunctiveQuery
from .varsets import Universe, VarSet

DEFAULT_MAX_VARS = 12
DEFAULT_SELECTOR_LIMIT = 10**6


@dataclass(frozen=True)
class TreeDecomposition:
    """A tree of bags with a free-connex witness.

    bags are distinct and sorted by encoding; edges index into bags;
    free_core holds the witness nodes (all nodes for a full query, no
    nodes for a Boolean one).
    """

    universe: Universe
    bags: tuple[VarSet, ...]
    edges: tuple[tuple[int, int], ...]
    free_core: tuple[int, ...]

    def bag_masks(self) -> tuple[int, ...]:
        return tuple(b.mask for b in self.bags)

    def adjacency(self) -> list[list[int]]:
        nbrs: list[list[int]] = [[] for _ in self.bags]
        for a, b in self.edges:
            nbrs[a].append(b)
            nbrs[b].append(a)
        return [sorted(n) for n in nbrs]

    def __repr__(self) -> str:
        bags = " ".join("{" + ",".join(b.members) + "}" for b in self.bags)
        return f"<td {bags}>"


def _connected(nodes: Sequence[int], adjacency: list[list[int]]) -> bool:
    if not nodes:
        return True
    todo = [nodes[0]]
    seen = {nodes[0]}
    member = set(nodes)
    while todo:
        cur = todo.pop()
        for nxt in adjacency[cur]:
            if nxt in member and nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return len(seen) == len(member)


def validate_td(query: ConjunctiveQuery, td: TreeDecomposition) -> Optional[str]:
    """Independent validity check; returns a reason string or None if valid.

    Verifies atom coverage, distinct bags, tree shape, the running
    intersection property, and the free-connex witness (waived for Boolean
    and full queries).
    """
    universe = query.universe
    masks = td.bag_masks()
    if len(set(masks)) != len(masks):
        return "bags are not distinct"
    if len(td.edges) != len(td.bags) - 1:
        return "edge count is not bags-1"
    adjacency = td.adjacency()
    if not _connected(range(len(td.bags)), adjacency):
        return "tree is not connected"
    for name, schema in query.atoms:
        if not any(schema.mask & ~m == 0 for m in masks):
            return f"atom {name} not covered by any bag"
    for i in range(len(universe)):
        bit = 1 << i
        holders = [n for n, m in enumerate(masks) if m & bit]
        if holders and not _connected(holders, adjacency):
            return f"variable {universe.names[i]} does not induce a subtree"
    free = query.free.mask
    full = universe.full_mask
    if free not in (0, full):
        core = td.free_core
        if not core:
            return "no free-connex witness"
        union = 0
        for n in core:
            if masks[n] & ~free:
                return "witness bag contains a bound variable"
            union |= masks[n]
        if union != free:
            return "witness bags do not cover the free variables"
        if not _connected(core, adjacency):
            return "witness is not a connected subtree"
    return None


def _elimination_bags(order: Sequence[int], adjacency: list[int], nvars: int) -> frozenset[int]:
    """Maximal bags of the chordal completion induced by an elimination order."""
    adj = list(adjacency)
    eliminated = 0
    bags: list[int] = []
    for v in order:
        live = adj[v] & ~eliminated & ~(1 << v)
        bag = live | (1 << v)
        bags.append(bag)
        rest = live
        while rest:
            low = rest & -rest
            u = low.bit_length() - 1
            adj[u] |= live & ~low
            rest ^= low
        eliminated |= 1 << v
    maximal = [b for b in bags if not any(b != o and b & ~o == 0 for o in bags)]
    return frozenset(maximal)


def _join_tree(bag_masks: Sequence[int]) -> tuple[tuple[int, int], ...]:
    """Maximum-weight spanning tree on shared-variable counts (Prim,
    deterministic tie-breaks). Valid as a join tree for maximal cliques of
    a chordal graph."""
    count = len(bag_masks)
    if count == 1:
        return ()
    in_tree = [0]
    edges: list[tuple[int, int]] = []
    remaining = set(range(1, count))
    while remaining:
        best = None
        for j in sorted(remaining):
            for i in in_tree:
                weight = bin(bag_masks[i] & bag_masks[j]).count("1")
                key = (-weight, j, i)
                if best is None or key < best[0]:
                    best = (key, i, j)
        _, i, j = best
        edges.append((i, j))
        in_tree.append(j)
        remaining.remove(j)
    return tuple(sorted(edges))


def _with_free_core(
    query: ConjunctiveQuery, bag_masks: frozenset[int]
) -> Optional[TreeDecomposition]:
    universe = query.universe
    ordered = tuple(sorted(bag_masks))
    bags = tuple(universe.from_mask(m) for m in ordered)
    edges = _join_tree(ordered)
    free = query.free.mask
    full = universe.full_mask
    if free == 0:
        core: tuple[int, ...] = ()
    elif free == full:
        core = tuple(range(len(bags)))
    else:
        core = tuple(n for n, m in enumerate(ordered) if m & ~free == 0)
        union = 0
        for n in core:
            union |= ordered[n]
        if union != free:
            return None
    td = TreeDecomposition(universe, bags, edges, core)
    if validate_td(query, td) is not None:
        return None
    return td


def enumerate_free_connex_tds(
    query: ConjunctiveQuery, max_vars: int = DEFAULT_MAX_VARS
) -> list[TreeDecomposition]:
    """The canonical decomposition family, sorted by bag-set encoding."""
    universe = query.universe
    nvars = len(universe)
    if nvars > max_vars:
        raise LimitError(f"query has {nvars} variables, limit is {max_vars}")
    adjacency = [0] * nvars
    for _, schema in query.atoms:
        mask = schema.mask
        rest = mask
        while rest:
            low = rest & -rest
            v = low.bit_length() - 1
            adjacency[v] |= mask & ~low
            rest ^= low

    free = query.free.mask
    full = universe.full_mask
    if free in (0, full):
        orders: Iterable[Sequence[int]] = itertools.permutations(range(nvars))
    else:
        bound = [v for v in range(nvars) if not free >> v & 1]
        free_vars = [v for v in range(nvars) if free >> v & 1]
        orders = (
            tuple(b) + tuple(f)
            for b in itertools.permutations(bound)
            for f in itertools.permutations(free_vars)
        )

    bag_sets: set[frozenset[int]] = set()
    for order in orders:
        bag_sets.add(_elimination_bags(order, adjacency, nvars))

    family: dict[tuple[int, ...], TreeDecomposition] = {}
    for bag_set in bag_sets:
        td = _with_free_core(query, bag_set)
        if td is not None:
            family[tuple(sorted(bag_set))] = td

    if free in (0, full):
        fallback_masks = frozenset({full})
    else:
        fallback_masks = frozenset({free, full})
    fallback = _with_free_core(query, fallback_masks)
    if fallback is None:
        raise InvariantError("fallback decomposition failed validation")
    family[tuple(sorted(fallback_masks))] = fallback

    result = [family[key] for key in sorted(family)]
    for td in result:
        reason = validate_td(query, td)
        if reason is not None:
            raise InvariantError(f"enumerated decomposition invalid: {reason}")
    return result


_FAMILY_CACHE: dict[tuple, list[TreeDecomposition]] = {}


def decomposition_family(
    query: ConjunctiveQuery, max_vars: int = DEFAULT_MAX_VARS
) -> list[TreeDecomposition]:
    """Cached canonical family, shared by the engine and the width LP."""
    key = (query.cache_key(), max_vars)
    family = _FAMILY_CACHE.get(key)
    if family is None:
        family = enumerate_free_connex_tds(query, max_vars)
        _FAMILY_CACHE[key] = family
    return family


def covers(available: Iterable[int] | frozenset[int], td: TreeDecomposition) -> bool:
    """True iff every bag of td appears among the available schema masks."""
    pool = available if isinstance(available, (set, frozenset)) else frozenset(available)
    return all(b.mask in pool for b in td.bags)


def bag_selectors(
    family: Sequence[TreeDecomposition], limit: int = DEFAULT_SELECTOR_LIMIT
) -> list[tuple[VarSet, ...]]:
    """Cartesian product choosing one bag per decomposition, in order."""
    if not family:
        raise InvariantError("a query always has the fallback decomposition")
    product = 1
    for td in family:
        product *= len(td.bags)
    if product > limit:
        raise LimitError(f"{product} bag selectors exceed the limit {limit}")
    return list(itertools.product(*[td.bags for td in family]))


def family_to_json(family: Sequence[TreeDecomposition]) -> str:
    payload = {
        "tds": [
            {
                "bags": [list(b.members) for b in td.bags],
                "edges": [list(e) for e in td.edges],
                "free_core": list(td.free_core),
            }
            for td in family
        ]
    }
    return json.dumps(payload)
