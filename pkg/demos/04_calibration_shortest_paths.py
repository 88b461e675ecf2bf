# Calibration repairs monotonicity and degree-bound consistency of a
# size-tracking set function while materializing the witnessing relations.
# The resulting values are single-source shortest-path distances, which the
# bundled textbook oracle confirms.

from jaguar import (
    DatabaseInstance,
    Relation,
    StatisticsSpec,
    StatTerm,
    Universe,
    calibrate,
    init_g,
    shortest_path_oracle,
)

universe = Universe(("X", "Y"))
rel = Relation(universe.varset(["X", "Y"]), [("1", "1"), ("2", "1"), ("1", "2")], name="R")
instance = DatabaseInstance(universe, [rel])

g = init_g(instance, 3)
print("before: finite entries only at the stored schema")
for mask in range(4):
    print("  g(", ",".join(universe.mask_names(mask)) or "{}", ") =", g[mask])

no_stats = StatisticsSpec(())
out_instance, out_g = calibrate(no_stats, instance, g, 3)
print("after:")
for mask in range(4):
    print("  g(", ",".join(universe.mask_names(mask)) or "{}", ") =", out_g[mask])
print("materialized projections:",
      sorted(",".join(universe.mask_names(m)) or "{}" for m in out_instance.derived_masks))

oracle = shortest_path_oracle(g, no_stats)
print("matches the shortest-path oracle:", out_g.allclose(oracle))

# a degree bound pulls a missing joint size down and materializes its guard join
u2 = Universe(("Y", "Z"))
base = Relation(u2.varset(["Y"]), [("1",), ("2",)], name="RY")
guard = Relation(u2.varset(["Y", "Z"]), [("1", "1"), ("2", "2")], name="S")
inst2 = DatabaseInstance(u2, [base, guard])
fd = StatTerm(
    targets=u2.varset(["Z"]),
    given=u2.varset(["Y"]),
    exponent=0.0,
    guard_name="S",
    guard_schema=guard.schema,
)
g2 = init_g(inst2, inst2.size)
inst3, g3 = calibrate(StatisticsSpec((fd,)), inst2, g2, inst2.size)
print("\nwith deg(S; Z|Y) <= 1:")
print("  g(Y,Z) =", round(g3[guard.schema], 6), " g(Y) =", round(g3[u2.varset(['Y'])], 6))
print("  materialized rows over (Y,Z):", sorted(inst3.get(guard.schema).rows))
