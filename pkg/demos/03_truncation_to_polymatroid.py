# Capping a monotone set function at its lowest submodularity violation
# yields a polymatroid. The violation level and its witness pair are what
# the evaluator uses to decide where to partition.

import numpy as np

from jaguar import SetFunction, Universe, check_polymatroid, min_violation, truncate

universe = Universe(("X", "Y", "Z", "W"))

# the classic seed: edges and singletons known, larger sets unknown
values = np.full(16, np.inf)
values[0] = 0.0
for name in universe.names:
    values[universe.varset([name]).mask] = 1.0
for pair in (("X", "Y"), ("Y", "Z"), ("Z", "W"), ("W", "X")):
    values[universe.varset(pair).mask] = 1.0
g = SetFunction(universe, values)

report = check_polymatroid(g)
print("seed function is a polymatroid:", bool(report))
print("first failure:", report.describe())

violation = min_violation(g)
x, y = violation.witness
print("lowest violation c =", violation.c, "witnessed by", x, "and", y)

result = truncate(g)
h = result.h
print("after truncation, h is a polymatroid:", bool(check_polymatroid(h)))
print("h(XYZW) =", h[universe.full])
low = sorted(universe.mask_names(m) for m in result.low_masks)
print("sets still at their own value:", low)

rng = np.random.default_rng(0)
trials = 2000
good = 0
for _ in range(trials):
    draw = rng.choice([0.0, 0.5, 1.0, 2.0, np.inf], size=16)
    draw[0] = 0.0
    for bit in range(4):
        for mask in range(16):
            if mask >> bit & 1:
                draw[mask] = max(draw[mask], draw[mask & ~(1 << bit)])
    capped = truncate(SetFunction(universe, draw)).h
    good += bool(check_polymatroid(capped))
print(f"random monotone draws truncating to polymatroids: {good}/{trials}")
