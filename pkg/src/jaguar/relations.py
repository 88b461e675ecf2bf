"""Immutable relational values and their algebra.

Relations are sets of rows over a VarSet schema (set semantics, no
duplicates). Rows are plain tuples of opaque atoms laid out in schema
order; atoms are compared by equality and by the builtin total order, and
are rendered as strings at the file boundary. All operations return fresh
values; nothing here mutates, so relations and instances can be shared
freely across concurrent evaluation branches.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Mapping, Optional

from .errors import SchemaError
from .varsets import Universe, VarSet

Row = tuple


class Relation:
    """A finite set of rows over a schema.

    Equality is (schema, row set) equality. Internal group/projection
    caches are lazily built and are safe because instances are immutable.
    """

    __slots__ = ("schema", "rows", "name", "_groups", "_projections")

    def __init__(self, schema: VarSet, rows: Iterable[Row], name: Optional[str] = None):
        frozen = frozenset(tuple(r) for r in rows)
        width = len(schema)
        for r in frozen:
            if len(r) != width:
                raise SchemaError(
                    f"row {r!r} has arity {len(r)}, schema {schema!r} has {width}"
                )
        self.schema = schema
        self.rows = frozen
        self.name = name
        self._groups: dict[int, dict[Row, tuple[Row, ...]]] = {}
        self._projections: dict[int, frozenset] = {}

    @classmethod
    def nullary(cls, universe: Universe, nonempty: bool = True) -> "Relation":
        """The relation over the empty schema: {()} or {}."""
        return cls(universe.empty, [()] if nonempty else [])

    _EMPTY_CACHE: dict[tuple[int, int], "Relation"] = {}

    @classmethod
    def empty(cls, schema: VarSet) -> "Relation":
        key = (id(schema.universe), schema.mask)
        rel = cls._EMPTY_CACHE.get(key)
        if rel is None:
            rel = cls(schema, ())
            cls._EMPTY_CACHE[key] = rel
        return rel

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[Row]:
        return iter(self.rows)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Relation)
            and other.schema == self.schema
            and other.rows == self.rows
        )

    def __hash__(self) -> int:
        return hash((self.schema, self.rows))

    def __repr__(self) -> str:
        label = self.name or "R"
        return f"{label}({','.join(self.schema.members)})[{len(self)} rows]"

    def sorted_rows(self) -> list[Row]:
        return sorted(self.rows)

    def project_rows(self, target: VarSet) -> frozenset:
        """Distinct projections of all rows onto target (cached)."""
        cached = self._projections.get(target.mask)
        if cached is not None:
            return cached
        positions = self.schema.universe.projection_positions(self.schema.mask, target.mask)
        result = frozenset(tuple(row[p] for p in positions) for row in self.rows)
        self._projections[target.mask] = result
        return result

    def groups(self, key: VarSet) -> Mapping[Row, tuple[Row, ...]]:
        """Rows grouped by their projection onto key (cached)."""
        cached = self._groups.get(key.mask)
        if cached is not None:
            return cached
        positions = self.schema.universe.projection_positions(self.schema.mask, key.mask)
        buckets: dict[Row, list[Row]] = {}
        for row in self.rows:
            buckets.setdefault(tuple(row[p] for p in positions), []).append(row)
        result = {k: tuple(v) for k, v in buckets.items()}
        self._groups[key.mask] = result
        return result


def project(rel: Relation, target: VarSet) -> Relation:
    """Projection onto target, which must be a subset of rel's schema."""
    if not target.issubset(rel.schema):
        raise SchemaError(f"cannot project {rel!r} onto {target!r}")
    if target == rel.schema:
        return rel
    return Relation(target, rel.project_rows(target))


def select_eq(rel: Relation, on: VarSet, value: Row) -> Relation:
    """Rows of rel whose projection onto `on` equals `value`."""
    if not on.issubset(rel.schema):
        raise SchemaError(f"selection variables {on!r} not in {rel.schema!r}")
    group = rel.groups(on).get(tuple(value), ())
    return Relation(rel.schema, group)


def semijoin(rel: Relation, other: Relation) -> Relation:
    """Rows of rel with a partner in other on the shared variables."""
    shared = rel.schema & other.schema
    keys = other.project_rows(shared)
    mine = rel.project_rows(shared)
    if mine <= keys:
        return rel
    positions = rel.schema.universe.projection_positions(rel.schema.mask, shared.mask)
    kept = [row for row in rel.rows if tuple(row[p] for p in positions) in keys]
    return Relation(rel.schema, kept)


def join(left: Relation, right: Relation) -> Relation:
    """Natural join; hash-based, building on the smaller side.

    Cost is proportional to the two input sizes plus the output size.
    """
    universe = left.schema.universe
    shared = left.schema & right.schema
    out_schema = left.schema | right.schema
    if not left.rows or not right.rows:
        return Relation.empty(out_schema)
    # Build the output row by pulling each variable from whichever input has it;
    # shared variables agree by construction.
    take: list[tuple[int, int]] = []
    li = dict(zip(left.schema.members, range(len(left.schema))))
    ri = dict(zip(right.schema.members, range(len(right.schema))))
    for name in out_schema.members:
        if name in li:
            take.append((0, li[name]))
        else:
            take.append((1, ri[name]))
    build, probe, build_side = (left, right, 0) if len(left) <= len(right) else (right, left, 1)
    built = build.groups(shared)
    probe_pos = universe.projection_positions(probe.schema.mask, shared.mask)
    out: list[Row] = []
    for prow in probe.rows:
        match = built.get(tuple(prow[p] for p in probe_pos))
        if not match:
            continue
        for brow in match:
            lrow, rrow = (brow, prow) if build_side == 0 else (prow, brow)
            out.append(tuple((lrow if side == 0 else rrow)[idx] for side, idx in take))
    return Relation(out_schema, out)


def degree_at(rel: Relation, targets: VarSet, given: VarSet, value: Row) -> int:
    """Count of distinct target-projections among rows matching given=value."""
    if not targets.issubset(rel.schema) or not given.issubset(rel.schema):
        raise SchemaError(
            f"degree arguments {targets!r}|{given!r} exceed schema {rel.schema!r}"
        )
    group = rel.groups(given).get(tuple(value))
    if not group:
        return 0
    positions = rel.schema.universe.projection_positions(rel.schema.mask, targets.mask)
    return len({tuple(row[p] for p in positions) for row in group})


def degree(rel: Relation, targets: VarSet, given: VarSet) -> int:
    """Max over groups of the distinct target-projection count; 0 if empty."""
    if not targets.issubset(rel.schema) or not given.issubset(rel.schema):
        raise SchemaError(
            f"degree arguments {targets!r}|{given!r} exceed schema {rel.schema!r}"
        )
    positions = rel.schema.universe.projection_positions(rel.schema.mask, targets.mask)
    best = 0
    for group in rel.groups(given).values():
        count = len({tuple(row[p] for p in positions) for row in group})
        if count > best:
            best = count
    return best


def max_degree_violation(
    rel: Relation, targets: VarSet, given: VarSet, bound: float
) -> Optional[tuple[Row, int]]:
    """First group (by sorted key) whose distinct-target count exceeds bound."""
    positions = rel.schema.universe.projection_positions(rel.schema.mask, targets.mask)
    for key in sorted(rel.groups(given)):
        group = rel.groups(given)[key]
        count = len({tuple(row[p] for p in positions) for row in group})
        if count > bound:
            return key, count
    return None


def intersect(left: Relation, right: Relation) -> Relation:
    if left.schema != right.schema:
        raise SchemaError("intersection requires identical schemas")
    return Relation(left.schema, left.rows & right.rows, name=left.name)


class DatabaseInstance:
    """A signature-unique collection of relations, keyed by schema.

    At most one relation per schema; augmenting with a relation whose
    schema is already present replaces it by the intersection. A schema
    and a strict superset of it may both be present. Instances are
    immutable; augment returns a fresh instance sharing unchanged
    relations.
    """

    __slots__ = ("universe", "relations", "derived_masks", "versions", "version_counter")

    def __init__(
        self,
        universe: Universe,
        relations: Iterable[Relation] = (),
        derived_masks: frozenset[int] = frozenset(),
    ):
        rels: dict[int, Relation] = {}
        for rel in relations:
            if rel.schema.universe != universe:
                raise SchemaError("relation universe does not match instance universe")
            mask = rel.schema.mask
            if mask in rels:
                rels[mask] = intersect(rels[mask], rel)
            else:
                rels[mask] = rel
        self.universe = universe
        self.relations = rels
        self.derived_masks = derived_masks
        # creation stamps; augmentation bumps the touched slot so consumers
        # can iterate oldest-first for cache-friendly reduction orders
        self.versions = {mask: 0 for mask in rels}
        self.version_counter = 0

    @property
    def size(self) -> int:
        """Total number of rows across all relations."""
        return sum(len(r) for r in self.relations.values())

    def schema_masks(self) -> frozenset[int]:
        return frozenset(self.relations)

    def get(self, schema: VarSet) -> Optional[Relation]:
        return self.relations.get(schema.mask)

    def get_mask(self, mask: int) -> Optional[Relation]:
        return self.relations.get(mask)

    def __contains__(self, schema: VarSet) -> bool:
        return schema.mask in self.relations

    def __iter__(self) -> Iterator[Relation]:
        """Relations in ascending schema encoding order."""
        for mask in sorted(self.relations):
            yield self.relations[mask]

    def __len__(self) -> int:
        return len(self.relations)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DatabaseInstance)
            and other.universe == self.universe
            and other.relations == self.relations
        )

    def __hash__(self):
        raise TypeError("DatabaseInstance is not hashable")

    def has_empty_relation(self) -> bool:
        return any(not r.rows for r in self.relations.values())

    def augment(self, rel: Relation, derived: bool = False) -> "DatabaseInstance":
        """This instance with rel added, or intersected into its schema slot."""
        if rel.schema.universe != self.universe:
            raise SchemaError("relation universe does not match instance universe")
        mask = rel.schema.mask
        existing = self.relations.get(mask)
        new_rels = dict(self.relations)
        changed = True
        if existing is None:
            new_rels[mask] = rel
        else:
            merged = intersect(existing, rel)
            if merged.rows == existing.rows:
                merged = existing  # keep caches when nothing changed
                changed = False
            new_rels[mask] = merged
        derived_masks = self.derived_masks | {mask} if derived else self.derived_masks
        out = DatabaseInstance.__new__(DatabaseInstance)
        out.universe = self.universe
        out.relations = new_rels
        out.derived_masks = derived_masks
        if changed:
            out.version_counter = self.version_counter + 1
            out.versions = dict(self.versions)
            out.versions[mask] = out.version_counter
        else:
            out.version_counter = self.version_counter
            out.versions = self.versions
        return out


def augment(instance: DatabaseInstance, rel: Relation) -> DatabaseInstance:
    return instance.augment(rel)


class AnswerSet:
    """Deduplicated output tuples over the free variables.

    Iteration is sorted (the canonical serialization order); membership
    and equality are set-based, so consumers may also stream the rows in
    any order they like via `.rows`.
    """

    __slots__ = ("universe", "free", "rows")

    def __init__(self, universe: Universe, free: VarSet, rows: Iterable[Row]):
        self.universe = universe
        self.free = free
        self.rows = frozenset(rows)

    def __iter__(self) -> Iterator[Row]:
        return iter(sorted(self.rows))

    def __len__(self) -> int:
        return len(self.rows)

    def __contains__(self, row) -> bool:
        return tuple(row) in self.rows

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, AnswerSet)
            and other.free == self.free
            and other.rows == self.rows
        )

    def __hash__(self):
        return hash((self.free, self.rows))

    def __repr__(self) -> str:
        return f"AnswerSet({','.join(self.free.members)}; {len(self)} rows)"

    def as_relation(self) -> Relation:
        return Relation(self.free, self.rows)
