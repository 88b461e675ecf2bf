# The separation the adaptive engine buys on the skewed family: join work
# (tuples produced while materializing relations) grows near-linearly,
# while forcing everything through one decomposition goes quadratic.
# A short ladder keeps this demo quick; the benchmark CLI runs the full one.

from jaguar.bench import CSV_HEADER, fitted_slope, run_ladder

print("adaptive engine:")
print(CSV_HEADER)
adaptive = run_ladder(m_min=32, m_max=512, epsilon=0.5)
for row in adaptive:
    print(row.csv())
print("fitted log-log slope:", round(fitted_slope(adaptive), 3))

print("\nforced through the first decomposition (bags XYZ, XZW):")
print(CSV_HEADER)
forced = run_ladder(m_min=32, m_max=512, epsilon=0.5, force_td=0)
for row in forced:
    print(row.csv())
print("fitted log-log slope:", round(fitted_slope(forced), 3))
