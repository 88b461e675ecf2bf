"""Brute-force reference evaluation and instance generators.

The brute-force evaluator is the independent yardstick for everything
else: it walks atoms left to right with a plain nested loop and per-step
consistency filtering, and deliberately shares no code with the engine's
join machinery (it only uses the Relation container). A second,
even-more-naive semantics based on counting satisfying assignments over
the active domain is provided for checking the oracle itself on small
inputs.
"""

from __future__ import annotations

import random
from typing import Optional, Sequence

from .errors import LimitError, ValidationError
from .frontend import ConjunctiveQuery
from .relations import AnswerSet, DatabaseInstance, Relation
from .varsets import Universe

DEFAULT_BUDGET = 1e12


def brute_force(
    query: ConjunctiveQuery,
    instance: DatabaseInstance,
    budget: float = DEFAULT_BUDGET,
) -> AnswerSet:
    """Left-deep nested-loop evaluation in canonical atom order.

    Refuses to run when the product of the atom relation sizes exceeds the
    budget. Results are projected onto the free variables and deduplicated.
    """
    universe = query.universe
    scans: list[Relation] = []
    product = 1.0
    for name, schema in query.atoms:
        rel = instance.get(schema)
        if rel is None:
            raise ValidationError(f"instance is missing relation {name}")
        scans.append(rel)
        product *= max(len(rel), 1)
    if product > budget:
        raise LimitError(f"atom size product {product:.3g} exceeds budget {budget:.3g}")

    free_positions = [universe.position(v) for v in query.free.members]
    partial: list[Optional[object]] = [None] * len(universe)
    out: set[tuple] = set()

    def walk(depth: int) -> None:
        if depth == len(scans):
            out.add(tuple(partial[p] for p in free_positions))
            return
        rel = scans[depth]
        positions = [universe.position(v) for v in rel.schema.members]
        for row in sorted(rel.rows):
            ok = True
            touched = []
            for p, value in zip(positions, row):
                bound = partial[p]
                if bound is None:
                    partial[p] = value
                    touched.append(p)
                elif bound != value:
                    ok = False
                    break
            if ok:
                walk(depth + 1)
            for p in touched:
                partial[p] = None

    if all(len(r) for r in scans):
        walk(0)
    return AnswerSet(universe, query.free, out)


def satisfaction_count(query: ConjunctiveQuery, instance: DatabaseInstance) -> AnswerSet:
    """Second-opinion semantics: enumerate assignments over the active
    domain of every variable and keep those satisfying all atoms.

    Exponential in the variable count; meant for tiny inputs only.
    """
    universe = query.universe
    active: list[list] = []
    for i, name in enumerate(universe.names):
        values: set = set()
        for rel in instance:
            if name in rel.schema:
                at = rel.schema.members.index(name)
                values.update(row[at] for row in rel.rows)
        active.append(sorted(values))
    atom_rows = []
    for _, schema in query.atoms:
        rel = instance.get(schema)
        positions = [universe.position(v) for v in schema.members]
        atom_rows.append((positions, rel.rows))
    free_positions = [universe.position(v) for v in query.free.members]

    out: set[tuple] = set()
    assignment: list = [None] * len(universe)

    def assign(i: int) -> None:
        if i == len(universe):
            for positions, rows in atom_rows:
                if tuple(assignment[p] for p in positions) not in rows:
                    return
            out.add(tuple(assignment[p] for p in free_positions))
            return
        if not active[i]:
            return
        for v in active[i]:
            assignment[i] = v
            assign(i + 1)
        assignment[i] = None

    if all(active):
        assign(0)
    return AnswerSet(universe, query.free, out)


FOUR_CYCLE_TEXT = "Q(X,Y,Z,W) :- R(X,Y), S(Y,Z), T(Z,W), U(W,X)."


def gen_square(m: int, universe: Optional[Universe] = None) -> DatabaseInstance:
    """The skewed four-cycle instance: four binary relations, each equal to
    ([m/2] x {1}) union ({1} x [m/2]).

    Each relation has m-1 rows; one value of every join variable has degree
    m/2 while all others have degree 1, which is exactly the profile the
    heavy/light split isolates.
    """
    if m < 2 or m % 2 != 0:
        raise ValidationError(f"construction parameter must be even and >= 2, got {m}")
    if universe is None:
        universe = Universe(("X", "Y", "Z", "W"))
    half = m // 2
    pairs = [(str(i), "1") for i in range(1, half + 1)]
    pairs += [("1", str(j)) for j in range(1, half + 1)]

    def rel(name: str, a: str, b: str) -> Relation:
        schema = universe.varset((a, b))
        ia = 0 if universe.position(a) < universe.position(b) else 1
        rows = [(p[ia], p[1 - ia]) for p in pairs]
        return Relation(schema, rows, name=name)

    return DatabaseInstance(
        universe,
        [rel("R", "X", "Y"), rel("S", "Y", "Z"), rel("T", "Z", "W"), rel("U", "W", "X")],
    )


def gen_random(
    seed: int,
    schemas: Sequence[tuple[str, Sequence[str]]],
    sizes: Sequence[int],
    domain_size: int,
    universe: Optional[Universe] = None,
) -> DatabaseInstance:
    """Seeded uniform sampling of relations without replacement.

    schemas pairs a relation name with its variable list; values are the
    strings "1".."domain_size". Identical arguments produce identical
    instances.
    """
    if len(schemas) != len(sizes):
        raise ValidationError("one size per relation required")
    if universe is None:
        seen: list[str] = []
        for _, vs in schemas:
            for v in vs:
                if v not in seen:
                    seen.append(v)
        universe = Universe(seen)
    rng = random.Random(seed)
    relations = []
    for (name, vs), size in zip(schemas, sizes):
        arity = len(vs)
        space = domain_size**arity
        if size > space:
            raise LimitError(
                f"{name}: cannot draw {size} distinct rows from a domain of {space}"
            )
        schema = universe.varset(vs)
        perm = sorted(range(arity), key=lambda i: universe.position(vs[i]))
        picked: set[tuple] = set()
        if size > space // 2:
            cells = sorted(rng.sample(range(space), size))
            for cell in cells:
                row = []
                rest = cell
                for _ in range(arity):
                    row.append(str(rest % domain_size + 1))
                    rest //= domain_size
                picked.add(tuple(row))
        else:
            while len(picked) < size:
                picked.add(
                    tuple(str(rng.randint(1, domain_size)) for _ in range(arity))
                )
        rows = [tuple(row[i] for i in perm) for row in picked]
        relations.append(Relation(schema, rows, name=name))
    return DatabaseInstance(universe, relations)
