# Core relational values: schemas as bitmask variable sets, immutable
# relations, and the algebra the evaluator is built from.

from jaguar import (
    DatabaseInstance,
    Relation,
    Universe,
    degree,
    degree_at,
    join,
    project,
    semijoin,
)

universe = Universe(("X", "Y", "Z"))
xy = universe.varset(["X", "Y"])
yz = universe.varset(["Y", "Z"])

r = Relation(xy, [("1", "1"), ("2", "1"), ("1", "2")], name="R")
s = Relation(yz, [("1", "1"), ("2", "1"), ("1", "2")], name="S")

print("R =", sorted(r.rows))
print("S =", sorted(s.rows))

# projections deduplicate
print("pi_X(R) =", sorted(project(r, universe.varset(["X"])).rows))

# semijoin keeps R-rows with a partner in S on the shared Y
print("R semijoin S =", sorted(semijoin(r, s).rows))

# natural join over the shared variable
joined = join(r, s)
print("R join S has", len(joined), "rows over", joined.schema.members)

# degrees: how many distinct Y values can one X value reach?
print("deg_R(Y|X) =", degree(r, universe.varset(["Y"]), universe.varset(["X"])))
print("deg_R(Y|X=1) =", degree_at(r, universe.varset(["Y"]), universe.varset(["X"]), ("1",)))

# instances are signature-unique: augmenting an existing schema intersects
instance = DatabaseInstance(universe, [r])
narrower = Relation(xy, [("1", "1"), ("9", "9")])
after = instance.augment(narrower)
print("after augmenting, the (X,Y) relation is", sorted(after.get(xy).rows))
