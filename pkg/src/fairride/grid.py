"""Road network as a grid of cells with 8-connectivity.

Cells are indexed row-major: ``index = row * cols + col``. Edge distances are
integer distance-units; generated grids use weight 1 in every direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_array
from scipy.sparse.csgraph import dijkstra

DEFAULT_CELL_SIZE_MILES = 1.24


class DisconnectedGraphError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int
    cell_size_miles: float = DEFAULT_CELL_SIZE_MILES

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if self.cell_size_miles <= 0:
            raise ValueError("cell_size_miles must be positive")

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    def cell(self, row: int, col: int) -> int:
        return row * self.cols + col

    def coords(self, cell: int) -> tuple[int, int]:
        return divmod(cell, self.cols)


@dataclass(eq=False)
class RoadGraph:
    """Immutable weighted undirected adjacency over ``n_cells`` cells.

    Single-source distance vectors are computed lazily and cached; the graph
    must not be mutated after construction.
    """

    n_cells: int
    edges: tuple[tuple[int, int, int], ...]
    spec: GridSpec | None = None
    _adj: list[list[tuple[int, int]]] = field(init=False, repr=False)
    _weight: dict[tuple[int, int], int] = field(init=False, repr=False)
    _csr: csr_array = field(init=False, repr=False)
    _dist_cache: dict[int, np.ndarray] = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n_cells)]
        weight: dict[tuple[int, int], int] = {}
        for u, v, w in self.edges:
            if not (0 <= u < self.n_cells and 0 <= v < self.n_cells):
                raise ValueError(f"edge ({u}, {v}) outside 0..{self.n_cells - 1}")
            if u == v:
                raise ValueError(f"self-loop on cell {u}")
            if int(w) != w or w < 0:
                raise ValueError(f"edge ({u}, {v}) distance must be a nonnegative integer, got {w}")
            w = int(w)
            if (u, v) in weight:
                w = min(w, weight[(u, v)])
            weight[(u, v)] = weight[(v, u)] = w
        for (u, v), w in weight.items():
            adj[u].append((v, w))
        for nbrs in adj:
            nbrs.sort()
        self._adj = adj
        self._weight = weight
        rows = [u for (u, _v) in weight]
        cols = [v for (_u, v) in weight]
        # csgraph drops explicit zeros, so zero-length edges carry a tiny sentinel
        self._has_zero_edge = any(w == 0 for w in weight.values())
        data = [float(w) if w > 0 else 1e-300 for w in weight.values()]
        self._csr = csr_array((data, (rows, cols)), shape=(self.n_cells, self.n_cells))
        self._dist_cache = {}
        if self.n_cells > 1 and np.isinf(self.distances_from(0)).any():
            raise DisconnectedGraphError("road graph is not connected")

    def neighbors(self, v: int) -> list[tuple[int, int]]:
        """``(neighbor, distance)`` pairs sorted by neighbor id."""
        return self._adj[v]

    def weight(self, u: int, v: int) -> int:
        return self._weight[(u, v)]

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self._weight

    def distances_from(self, source: int) -> np.ndarray:
        cached = self._dist_cache.get(source)
        if cached is None:
            d = dijkstra(self._csr, directed=False, indices=source)
            finite = np.isfinite(d)
            # undo the zero-weight sentinel and snap to integers
            d[finite] = np.rint(d[finite])
            cached = d
            cached.setflags(write=False)
            self._dist_cache[source] = cached
        return cached

    def clear_cache(self):
        self._dist_cache.clear()

    def shortest_path_len(self, a: int, b: int) -> int:
        d = self.distances_from(b)[a]
        if not np.isfinite(d):
            raise DisconnectedGraphError(f"cell {b} unreachable from {a}")
        return int(d)

    def shortest_path(self, a: int, b: int) -> list[int]:
        """Cells of a shortest path from ``a`` to ``b`` inclusive.

        Ties between equally short continuations go to the lowest cell id.
        """
        to_b = self.distances_from(b)
        if not np.isfinite(to_b[a]):
            raise DisconnectedGraphError(f"cell {b} unreachable from {a}")
        hops = self._tight_hops(b) if self._has_zero_edge else None
        path = [a]
        cur = a
        while cur != b:
            here = to_b[cur]
            for u, w in self._adj[cur]:
                if w + to_b[u] != here:
                    continue
                if hops is None or hops[u] == hops[cur] - 1:
                    cur = u
                    break
            else:  # pragma: no cover - distances are consistent by construction
                raise RuntimeError("shortest-path reconstruction failed")
            path.append(cur)
        return path

    def _tight_hops(self, b: int) -> dict[int, int]:
        # edge counts to b using only edges that lie on some shortest path
        to_b = self.distances_from(b)
        hops = {b: 0}
        frontier = [b]
        while frontier:
            nxt = []
            for v in frontier:
                for u, w in self._adj[v]:
                    if u not in hops and to_b[u] == to_b[v] + w:
                        hops[u] = hops[v] + 1
                        nxt.append(u)
            frontier = nxt
        return hops

    def path_length(self, cells: list[int]) -> int:
        return sum(self._weight[(u, v)] for u, v in zip(cells, cells[1:]))

    def forward_neighbors(self, v: int, dest: int, include_ties: bool = False) -> list[int]:
        """Neighbors of ``v`` strictly closer to ``dest`` than ``v`` is.

        With ``include_ties`` the neighbors at equal distance are kept as well,
        i.e. every neighbor that is not farther from ``dest``.
        """
        to_dest = self.distances_from(dest)
        here = to_dest[v]
        if include_ties:
            return [u for u, _ in self._adj[v] if to_dest[u] <= here and u != v and v != dest]
        return [u for u, _ in self._adj[v] if to_dest[u] < here]


def build_grid(spec: GridSpec, diagonal_weight: int = 1, orthogonal_weight: int = 1) -> RoadGraph:
    edges = []
    for r in range(spec.rows):
        for c in range(spec.cols):
            u = spec.cell(r, c)
            # each undirected edge once: right, down, down-right, down-left
            for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < spec.rows and 0 <= cc < spec.cols:
                    w = diagonal_weight if dr and dc else orthogonal_weight
                    edges.append((u, spec.cell(rr, cc), w))
    return RoadGraph(spec.n_cells, tuple(edges), spec)


def load_edge_list(path: str | Path) -> RoadGraph:
    """Read the ``cells m`` / ``u v w`` edge-list format."""
    n_cells = None
    edges = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n_cells is None:
            if parts[0] != "cells" or len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected header 'cells m'")
            n_cells = int(parts[1])
            continue
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'u v w'")
        u, v, w = (int(p) for p in parts)
        edges.append((u, v, w))
    if n_cells is None:
        raise ValueError(f"{path}: empty edge list")
    return RoadGraph(n_cells, tuple(edges))


def dump_edge_list(graph: RoadGraph) -> str:
    lines = [f"cells {graph.n_cells}"]
    seen = set()
    for u, v, _ in graph.edges:
        key = (min(u, v), max(u, v))
        if key in seen:
            continue
        seen.add(key)
        lines.append(f"{key[0]} {key[1]} {graph.weight(*key)}")
    return "\n".join(lines) + "\n"
