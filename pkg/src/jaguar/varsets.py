"""Variable universes and bitmask-encoded variable sets.

Every query fixes a finite, totally ordered universe of variables. A
``VarSet`` is an immutable subset of one universe, encoded as an integer
bitmask where bit ``i`` stands for the ``i``-th variable of the universe.
The encoding doubles as the canonical tie-breaking key everywhere a
deterministic order over subsets is needed.
"""

from __future__ import annotations

import sys
from typing import Iterable, Iterator, Sequence

from .errors import SchemaError

_NAME_OK = sys.intern  # interned names give O(1) equality in hot loops


class Universe:
    """A fixed, ordered tuple of variable names.

    The position of a name is its bit index; iteration order of every
    VarSet derived from this universe follows these positions.
    """

    __slots__ = ("names", "_positions", "_cache", "_proj_cache", "_hash")

    def __init__(self, names: Sequence[str]):
        interned = tuple(_NAME_OK(n) for n in names)
        positions = {}
        for pos, name in enumerate(interned):
            if name in positions:
                raise SchemaError(f"duplicate variable {name!r} in universe")
            positions[name] = pos
        self.names = interned
        self._positions = positions
        self._cache: dict[int, VarSet] = {}
        self._proj_cache: dict[tuple[int, int], tuple[int, ...]] = {}
        self._hash = hash(interned)

    def __len__(self) -> int:
        return len(self.names)

    def __eq__(self, other) -> bool:
        # value semantics: two universes with the same name order are the same
        return isinstance(other, Universe) and other.names == self.names

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Universe({', '.join(self.names)})"

    def position(self, name: str) -> int:
        try:
            return self._positions[name]
        except KeyError:
            raise SchemaError(f"unknown variable {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._positions

    @property
    def full_mask(self) -> int:
        return (1 << len(self.names)) - 1

    def varset(self, names: Iterable[str]) -> VarSet:
        mask = 0
        for name in names:
            mask |= 1 << self.position(name)
        return self.from_mask(mask)

    def from_mask(self, mask: int) -> VarSet:
        vs = self._cache.get(mask)
        if vs is None:
            if mask < 0 or mask > self.full_mask:
                raise SchemaError(f"mask {mask:#x} outside universe of size {len(self)}")
            vs = VarSet(self, mask)
            self._cache[mask] = vs
        return vs

    @property
    def empty(self) -> VarSet:
        return self.from_mask(0)

    @property
    def full(self) -> VarSet:
        return self.from_mask(self.full_mask)

    def subsets(self) -> Iterator[VarSet]:
        """All subsets in ascending encoding order."""
        for mask in range(self.full_mask + 1):
            yield self.from_mask(mask)

    def mask_names(self, mask: int) -> tuple[str, ...]:
        return tuple(n for i, n in enumerate(self.names) if mask >> i & 1)

    def projection_positions(self, schema_mask: int, target_mask: int) -> tuple[int, ...]:
        """Positions of target's variables inside a row laid out over schema.

        target must be a subset of schema.
        """
        key = (schema_mask, target_mask)
        cached = self._proj_cache.get(key)
        if cached is not None:
            return cached
        if target_mask & ~schema_mask:
            raise SchemaError(
                f"{self.mask_names(target_mask)} not a subset of schema "
                f"{self.mask_names(schema_mask)}"
            )
        positions = []
        at = 0
        for i in range(len(self.names)):
            bit = 1 << i
            if schema_mask & bit:
                if target_mask & bit:
                    positions.append(at)
                at += 1
        result = tuple(positions)
        self._proj_cache[key] = result
        return result


class VarSet:
    """Immutable subset of a universe; compares and hashes by encoding."""

    __slots__ = ("universe", "mask")

    def __init__(self, universe: Universe, mask: int):
        self.universe = universe
        self.mask = mask

    @property
    def members(self) -> tuple[str, ...]:
        return self.universe.mask_names(self.mask)

    @property
    def encoding(self) -> int:
        return self.mask

    def __iter__(self) -> Iterator[str]:
        return iter(self.members)

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def __bool__(self) -> bool:
        return self.mask != 0

    def __contains__(self, name: str) -> bool:
        return bool(self.mask >> self.universe.position(name) & 1)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, VarSet)
            and other.mask == self.mask
            and (other.universe is self.universe or other.universe == self.universe)
        )

    def __hash__(self) -> int:
        return hash((self.universe._hash, self.mask))

    def __lt__(self, other: "VarSet") -> bool:
        return self.mask < other.mask

    def __or__(self, other: "VarSet") -> "VarSet":
        return self.universe.from_mask(self.mask | other.mask)

    def __and__(self, other: "VarSet") -> "VarSet":
        return self.universe.from_mask(self.mask & other.mask)

    def __sub__(self, other: "VarSet") -> "VarSet":
        return self.universe.from_mask(self.mask & ~other.mask)

    def issubset(self, other: "VarSet") -> bool:
        return not (self.mask & ~other.mask)

    def issuperset(self, other: "VarSet") -> bool:
        return not (other.mask & ~self.mask)

    def __repr__(self) -> str:
        return "{" + ",".join(self.members) + "}"
