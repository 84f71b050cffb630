"""Query-time scaling of the route recommender over growing grids."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .demand import RequestGraph
from .grid import GridSpec, build_grid
from .planner import recommend

DEFAULT_SIDES = (10, 20, 30, 40, 50, 60)


@dataclass(frozen=True)
class BenchRow:
    side: int
    cells: int
    median_s: float
    max_s: float
    route_len: int


def bench_instance(side: int, seed: int = 0, reach: int = 4, density: float = 0.002):
    """A grid with sparse random requests and one heavy request ``reach`` steps
    east of the centre, so the length budget is the same at every size."""
    spec = GridSpec(side, side)
    road = build_grid(spec)
    n = spec.n_cells
    rng = np.random.default_rng([seed, side])
    src = spec.cell(side // 2, side // 2)
    dst = spec.cell(side // 2, min(side - 1, side // 2 + reach))
    m = max(1, int(density * n * n))
    pairs: dict[tuple[int, int], float] = {}
    for a, b, w in zip(rng.integers(0, n, m), rng.integers(0, n, m), rng.integers(1, 4, m)):
        if a != b:
            pairs[(int(a), int(b))] = float(w)
    pairs[(src, dst)] = 100.0
    return road, RequestGraph.from_pairs(n, pairs), src


def _query_seconds(inst, t_d: float):
    road, req, src = inst
    road.clear_cache()
    t0 = time.perf_counter()
    route = recommend(road, req, src, t_d)
    return time.perf_counter() - t0, route


def time_query(side: int, repeats: int = 21, t_d: float = 1.5, seed: int = 0) -> BenchRow:
    """Wall time of a full recommendation (destination, DAG, DP) with cold caches."""
    inst = bench_instance(side, seed)
    times = []
    route = None
    for _ in range(repeats):
        dt, route = _query_seconds(inst, t_d)
        times.append(dt)
    return BenchRow(side, side * side, float(np.median(times)), float(max(times)), len(route.cells))


def linear_r2(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    return 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0


def run_bench(sides=DEFAULT_SIDES, repeats: int = 21, t_d: float = 1.5) -> tuple[list[BenchRow], float]:
    """Median query time per grid size and the R^2 of a linear fit against cell count.

    Sizes are interleaved within each repeat so machine-load drift spreads
    evenly across them.
    """
    insts = {s: bench_instance(s) for s in sides}
    times: dict[int, list[float]] = {s: [] for s in sides}
    lens: dict[int, int] = {}
    for s in sides:  # warm-up
        _query_seconds(insts[s], t_d)
    for _ in range(repeats):
        for s in sides:
            dt, route = _query_seconds(insts[s], t_d)
            times[s].append(dt)
            lens[s] = len(route.cells)
    rows = [BenchRow(s, s * s, float(np.median(times[s])), float(max(times[s])), lens[s]) for s in sides]
    return rows, linear_r2([r.cells for r in rows], [r.median_s for r in rows])
