import itertools

import numpy as np
import pytest

from fairride.golden import toy
from fairride.grid import GridSpec, RoadGraph, build_grid


@pytest.fixture
def toy_world():
    return toy()


def random_weighted_grid(rows: int, cols: int, rng: np.random.Generator, low: int = 1, high: int = 3) -> RoadGraph:
    """8-connected grid with independent integer edge weights in [low, high]."""
    spec = GridSpec(rows, cols)
    base = build_grid(spec)
    edges = [(u, v, int(rng.integers(low, high + 1))) for u, v, _ in base.edges if u < v]
    return RoadGraph(spec.n_cells, tuple(edges), spec)


def floyd_warshall(road: RoadGraph) -> np.ndarray:
    n = road.n_cells
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0)
    for u in range(n):
        for v, w in road.neighbors(u):
            d[u, v] = min(d[u, v], w)
    for k in range(n):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    return d


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
