"""Scaling ladder over the skewed four-cycle family.

One row per construction parameter m: evaluate the four-cycle query over
gen_square(m) and report the join work (tuples produced while
materializing relations; output assembly is budgeted separately by the
output size) together with the recursion shape. Forcing a single
decomposition replaces the adaptive run with the one-decomposition
baseline, whose bag materialization is the quadratic step on this family.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

from .calibration import WorkMeter
from .decompositions import decomposition_family
from .engine import EngineConfig, baseline_single_td, evaluate
from .errors import ValidationError
from .frontend import default_stats, parse_query
from .generators import FOUR_CYCLE_TEXT, gen_square

CSV_HEADER = "m,N,epsilon,join_work_tuples,heavy_edges_max,light_run_max,wall_ms"


@dataclass
class BenchRow:
    m: int
    total_size: int
    epsilon: float
    join_work_tuples: int
    heavy_edges_max: int
    light_run_max: int
    wall_ms: float

    def csv(self) -> str:
        return (
            f"{self.m},{self.total_size},{self.epsilon:g},{self.join_work_tuples},"
            f"{self.heavy_edges_max},{self.light_run_max},{self.wall_ms:.3f}"
        )


def ladder(m_min: int = 64, m_max: int = 4096) -> list[int]:
    if m_min < 2 or m_min > m_max:
        raise ValidationError("need 2 <= m_min <= m_max")
    out = []
    m = m_min
    while m <= m_max:
        out.append(m)
        m *= 2
    return out


def run_one(m: int, epsilon: float, force_td: Optional[int] = None) -> BenchRow:
    query = parse_query(FOUR_CYCLE_TEXT)
    instance = gen_square(m, universe=query.universe)
    total = instance.size
    stats = default_stats(query, instance, total)
    meter = WorkMeter()
    started = time.perf_counter()
    if force_td is None:
        config = EngineConfig(epsilon=epsilon)
        _, trace = evaluate(query, stats, instance, config, meter=meter)
        heavy_max = trace.max_heavy_edges_per_path()
        light_max = trace.max_light_run()
    else:
        family = decomposition_family(query)
        if not 0 <= force_td < len(family):
            raise ValidationError(
                f"decomposition index {force_td} out of range 0..{len(family) - 1}"
            )
        baseline_single_td(query, instance, family[force_td], meter=meter)
        heavy_max = 0
        light_max = 0
    wall_ms = (time.perf_counter() - started) * 1000.0
    return BenchRow(m, total, epsilon, meter.produced, heavy_max, light_max, wall_ms)


def run_ladder(
    m_min: int = 64,
    m_max: int = 4096,
    epsilon: float = 0.5,
    force_td: Optional[int] = None,
) -> list[BenchRow]:
    return [run_one(m, epsilon, force_td) for m in ladder(m_min, m_max)]


def fitted_slope(rows: list[BenchRow]) -> float:
    """Least-squares slope of log join work against log instance size."""
    import math

    xs = [math.log(r.total_size) for r in rows]
    ys = [math.log(max(r.join_work_tuples, 1)) for r in rows]
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    num = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    den = sum((x - mean_x) ** 2 for x in xs)
    return num / den
