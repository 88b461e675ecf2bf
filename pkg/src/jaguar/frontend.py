"""Query text, statistics files, and TSV data directories.

Grammar for queries::

    query   := head ":-" body "."
    head    := NAME "(" varlist? ")"
    body    := atom ("," atom)*
    atom    := NAME "(" varlist ")"
    varlist := VAR ("," VAR)*

NAME and VAR are ``[A-Za-z_][A-Za-z0-9_]*``; whitespace is insignificant.
Statistics files hold lines ``deg(<RelName>; <varlist>|<varlist>) <= <bound>``
with ``#`` comments; bounds are absolute counts, converted to exponents on a
log base N scale at load time. Data directories hold one ``<RelName>.tsv``
per relation with a header row of variable names.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import QueryParseError, ValidationError
from .relations import DatabaseInstance, Relation, degree, max_degree_violation
from .varsets import Universe, VarSet

_TOKEN = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*|[(),.|]|:-)")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class ConjunctiveQuery:
    """A join query over named atoms with a set of free variables.

    Atoms are kept one per schema (two atoms over the same variables are
    merged; their data is intersected at load time) and are ordered
    canonically by relation name, then schema encoding.
    """

    name: str
    universe: Universe
    free: VarSet
    atoms: tuple[tuple[str, VarSet], ...]

    @property
    def variables(self) -> VarSet:
        return self.universe.full

    @property
    def is_boolean(self) -> bool:
        return not self.free

    @property
    def is_full(self) -> bool:
        return self.free == self.universe.full

    def atom_masks(self) -> tuple[int, ...]:
        return tuple(schema.mask for _, schema in self.atoms)

    def cache_key(self) -> tuple:
        return (self.universe.names, self.free.mask, self.atom_masks())

    def __repr__(self) -> str:
        return f"<query {render_query(self)!r}>"


@dataclass(frozen=True)
class StatTerm:
    """One degree bound: fixing `given` in the guard leaves at most
    N**exponent distinct `targets` projections."""

    targets: VarSet
    given: VarSet
    exponent: float
    guard_name: str
    guard_schema: VarSet
    raw_bound: Optional[float] = None

    @property
    def union_mask(self) -> int:
        return self.targets.mask | self.given.mask


@dataclass(frozen=True)
class StatisticsSpec:
    terms: tuple[StatTerm, ...]

    def __iter__(self):
        return iter(self.terms)

    def __len__(self):
        return len(self.terms)

    def cache_key(self) -> tuple:
        return tuple(
            (t.targets.mask, t.given.mask, round(t.exponent, 12)) for t in self.terms
        )


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.items: list[tuple[str, int]] = []
        pos = 0
        while pos < len(text):
            rest = text[pos:]
            if rest.strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if m is None:
                bad = len(text) - len(text[pos:].lstrip())
                raise QueryParseError(f"unexpected character {text[bad]!r}", bad)
            self.items.append((m.group(1), m.start(1)))
            pos = m.end()
        self.at = 0

    def peek(self) -> Optional[str]:
        return self.items[self.at][0] if self.at < len(self.items) else None

    def pos(self) -> int:
        return self.items[self.at][1] if self.at < len(self.items) else len(self.text)

    def take(self, expected: Optional[str] = None) -> str:
        if self.at >= len(self.items):
            raise QueryParseError(
                f"unexpected end of input, expected {expected or 'more input'}",
                len(self.text),
            )
        tok, pos = self.items[self.at]
        if expected is not None and tok != expected:
            raise QueryParseError(f"expected {expected!r}, found {tok!r}", pos)
        self.at += 1
        return tok

    def take_ident(self, what: str) -> str:
        tok, pos = self.items[self.at] if self.at < len(self.items) else (None, len(self.text))
        if tok is None or not _IDENT.match(tok):
            raise QueryParseError(f"expected {what}, found {tok!r}", pos)
        self.at += 1
        return tok


def _parse_varlist(toks: _Tokens, allow_empty: bool) -> list[str]:
    names: list[str] = []
    if toks.peek() == ")":
        if allow_empty:
            return names
        raise QueryParseError("empty variable list not allowed here", toks.pos())
    while True:
        names.append(toks.take_ident("variable"))
        if toks.peek() == ",":
            toks.take(",")
            continue
        return names


def parse_query(text: str) -> ConjunctiveQuery:
    """Parse query text; merges duplicate-schema atoms and validates the head.

    Raises QueryParseError with a position for syntax issues; also rejects a
    repeated variable within one atom, a free variable missing from the
    body, and an empty body.
    """
    toks = _Tokens(text)
    name = toks.take_ident("query name")
    toks.take("(")
    head = _parse_varlist(toks, allow_empty=True)
    toks.take(")")
    toks.take(":-")
    raw_atoms: list[tuple[str, list[str], int]] = []
    while True:
        apos = toks.pos()
        rel = toks.take_ident("relation name")
        toks.take("(")
        vlist = _parse_varlist(toks, allow_empty=False)
        toks.take(")")
        raw_atoms.append((rel, vlist, apos))
        if toks.peek() == ",":
            toks.take(",")
            continue
        break
    toks.take(".")
    if toks.peek() is not None:
        raise QueryParseError(f"trailing input {toks.peek()!r}", toks.pos())
    if not raw_atoms:
        raise QueryParseError("query body is empty", len(text))

    order: list[str] = []
    seen = set()
    for rel, vlist, apos in raw_atoms:
        if len(set(vlist)) != len(vlist):
            raise QueryParseError(
                f"atom {rel} repeats a variable; atom schemas are variable sets", apos
            )
        for v in vlist:
            if v not in seen:
                seen.add(v)
                order.append(v)
    universe = Universe(order)

    by_schema: dict[int, str] = {}
    for rel, vlist, _ in raw_atoms:
        mask = universe.varset(vlist).mask
        if mask not in by_schema or rel < by_schema[mask]:
            by_schema[mask] = rel
    atoms = tuple(
        sorted(
            ((rel, universe.from_mask(mask)) for mask, rel in by_schema.items()),
            key=lambda a: (a[0], a[1].mask),
        )
    )

    missing = [v for v in head if v not in universe]
    if missing:
        raise QueryParseError(
            f"free variable {missing[0]!r} does not occur in the body"
        )
    dup_free = {v for v in head if head.count(v) > 1}
    if dup_free:
        raise QueryParseError(f"free variable {sorted(dup_free)[0]!r} repeated in head")
    return ConjunctiveQuery(name, universe, universe.varset(head), atoms)


def render_query(query: ConjunctiveQuery) -> str:
    """Canonical text form; parse(render(q)) == q."""
    head = ",".join(query.free.members)
    body = ", ".join(f"{rel}({','.join(schema.members)})" for rel, schema in query.atoms)
    return f"{query.name}({head}) :- {body}."


_STAT_LINE = re.compile(
    r"deg\(\s*([A-Za-z_][A-Za-z0-9_]*)\s*;([^|]*)\|([^)]*)\)\s*<=\s*([0-9]+(?:\.[0-9]+)?)\s*\Z"
)


def _split_vars(chunk: str, universe: Universe, line_no: int) -> VarSet:
    names = [v.strip() for v in chunk.split(",") if v.strip()]
    for v in names:
        if not _IDENT.match(v):
            raise QueryParseError(f"bad variable {v!r} on line {line_no}")
        if v not in universe:
            raise ValidationError(f"unknown variable {v!r} on line {line_no}")
    return universe.varset(names)


def name_index(instance: DatabaseInstance) -> dict[str, VarSet]:
    index: dict[str, VarSet] = {}
    for rel in instance:
        if rel.name:
            index[rel.name] = rel.schema
    return index


def parse_stats(
    text: str,
    instance: DatabaseInstance,
    total_size: int,
    universe: Optional[Universe] = None,
) -> StatisticsSpec:
    """Parse and verify a statistics file against an instance of given size.

    Every term needs a guard relation (by name) whose schema contains the
    term's variables, and the instance must actually satisfy the stated
    bound; otherwise the offending group value is reported.
    """
    if total_size < 2:
        raise ValidationError("statistics need an instance of size at least 2")
    universe = universe or instance.universe
    names = name_index(instance)
    log_n = math.log(total_size)
    terms: list[StatTerm] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _STAT_LINE.match(line)
        if m is None:
            raise QueryParseError(f"unreadable statistics line {line_no}: {raw!r}")
        guard_name, targets_txt, given_txt, bound_txt = m.groups()
        bound = float(bound_txt)
        if bound < 1:
            raise ValidationError(f"bound on line {line_no} must be at least 1")
        targets = _split_vars(targets_txt, universe, line_no)
        given = _split_vars(given_txt, universe, line_no)
        guard_schema = names.get(guard_name)
        if guard_schema is None:
            raise ValidationError(f"guard relation {guard_name!r} not in the instance")
        if not (targets | given).issubset(guard_schema):
            raise ValidationError(
                f"guard {guard_name} over {guard_schema!r} does not contain "
                f"{(targets | given)!r}"
            )
        guard = instance.get(guard_schema)
        violation = max_degree_violation(guard, targets, given, bound)
        if violation is not None:
            key, count = violation
            raise ValidationError(
                f"statistic on line {line_no} unsatisfied: group "
                f"{dict(zip(given.members, key))} has {count} distinct "
                f"{targets!r} values, bound is {bound:g}"
            )
        terms.append(
            StatTerm(
                targets=targets,
                given=given,
                exponent=math.log(bound) / log_n,
                guard_name=guard_name,
                guard_schema=guard_schema,
                raw_bound=bound,
            )
        )
    return StatisticsSpec(tuple(terms))


def default_stats(
    query: ConjunctiveQuery,
    instance: Optional[DatabaseInstance],
    total_size: int,
    classic: bool = False,
) -> StatisticsSpec:
    """One cardinality term per atom.

    With classic=True every exponent is forced to 1 (pure relation-size
    caps, data-free); otherwise the exponent is the atom relation's actual
    size on a log base N scale.
    """
    universe = query.universe
    log_n = math.log(total_size) if total_size >= 2 else None
    terms = []
    for rel_name, schema in query.atoms:
        if classic:
            exponent, raw = 1.0, None
        else:
            if instance is None or log_n is None:
                raise ValidationError("size-based statistics need an instance of size >= 2")
            rel = instance.get(schema)
            if rel is None:
                raise ValidationError(f"instance is missing relation {rel_name}{schema!r}")
            raw = float(len(rel))
            exponent = math.log(len(rel)) / log_n if len(rel) >= 1 else 0.0
        terms.append(
            StatTerm(
                targets=schema,
                given=universe.empty,
                exponent=exponent,
                guard_name=rel_name,
                guard_schema=schema,
                raw_bound=raw,
            )
        )
    return StatisticsSpec(tuple(terms))


def instance_satisfies(instance: DatabaseInstance, stats: StatisticsSpec) -> bool:
    """Degree-level satisfaction check of every term against its guard."""
    n = instance.size
    if n < 2:
        return False
    for term in stats:
        guard = instance.get(term.guard_schema)
        if guard is None:
            return False
        if math.log(max(degree(guard, term.targets, term.given), 1)) > (
            term.exponent * math.log(n) + 1e-9
        ):
            return False
    return True


def load_instance(
    path: str | Path,
    universe: Optional[Universe] = None,
    query: Optional[ConjunctiveQuery] = None,
) -> DatabaseInstance:
    """Load a directory of .tsv files into a signature-unique instance.

    Each file holds a header of variable names and one row per line.
    Duplicate rows collapse; files over identical schemas intersect. When a
    query is supplied its universe is used and unknown variables are
    rejected.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise ValidationError(f"{directory} is not a directory")
    files = sorted(directory.glob("*.tsv"))
    if not files:
        raise ValidationError(f"no .tsv files in {directory}")
    if query is not None:
        universe = query.universe

    headers: dict[Path, list[str]] = {}
    for f in files:
        with f.open("r", encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").rstrip("\r")
        cols = header.split("\t") if header else []
        if not cols or any(not _IDENT.match(c) for c in cols):
            raise ValidationError(f"{f.name}: malformed header {header!r}")
        if len(set(cols)) != len(cols):
            raise ValidationError(f"{f.name}: repeated variable in header")
        headers[f] = cols

    if universe is None:
        seen: list[str] = []
        for f in files:
            for c in headers[f]:
                if c not in seen:
                    seen.append(c)
        universe = Universe(sorted(seen))

    relations: list[Relation] = []
    for f in files:
        cols = headers[f]
        unknown = [c for c in cols if c not in universe]
        if unknown:
            raise ValidationError(f"{f.name}: unknown variable {unknown[0]!r}")
        schema = universe.varset(cols)
        # rows are stored in universe order, which may differ from file order
        perm = sorted(range(len(cols)), key=lambda i: universe.position(cols[i]))
        rows = []
        with f.open("r", encoding="utf-8") as fh:
            next(fh)
            for ln, raw in enumerate(fh, start=2):
                line = raw.rstrip("\n").rstrip("\r")
                if line == "":
                    continue
                parts = line.split("\t")
                if len(parts) != len(cols):
                    raise ValidationError(
                        f"{f.name}:{ln}: expected {len(cols)} fields, found {len(parts)}"
                    )
                rows.append(tuple(parts[i] for i in perm))
        relations.append(Relation(schema, rows, name=f.stem))
    instance = DatabaseInstance(universe, relations)

    if query is not None:
        missing = [
            f"{rel}({','.join(schema.members)})"
            for rel, schema in query.atoms
            if instance.get(schema) is None
        ]
        if missing:
            raise ValidationError(f"instance is missing relation {missing[0]}")
    return instance


def check_matches_schema(query: ConjunctiveQuery, instance: DatabaseInstance) -> None:
    """The top-level engine contract: exactly the query's relations."""
    atom_masks = set(query.atom_masks())
    for rel, schema in query.atoms:
        if instance.get(schema) is None:
            raise ValidationError(f"instance is missing relation {rel}({','.join(schema.members)})")
    extra = [m for m in instance.schema_masks() if m not in atom_masks]
    if extra:
        names = instance.universe.mask_names(extra[0])
        raise ValidationError(
            f"instance has a relation over ({','.join(names)}) that the query does not use"
        )
