"""Detour-constrained maximum-request route recommendation.

From the driver's cell the destination is the cell with the most expected
requests.  The request graph is then reduced to forward edges between
road-adjacent cells, which is acyclic, and a label-setting dynamic program over
``(cell, path length)`` states finds the path collecting the most expected
requests while keeping the origin-to-destination rider within its detour
threshold.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .demand import RequestGraph
from .grid import RoadGraph


class NoDestinationError(LookupError):
    """No request leaves the source cell in the current prediction."""


@dataclass(frozen=True)
class Route:
    cells: tuple[int, ...]
    total_dist: int
    expected_requests: float

    def __len__(self):
        return len(self.cells)


@dataclass(frozen=True)
class DagEdge:
    head: int
    req_weight: float
    dist: int


@dataclass
class Dag:
    source: int
    dest: int
    sp_to_dest: dict[int, int]
    out_edges: dict[int, list[DagEdge]]

    @property
    def vertices(self) -> list[int]:
        return sorted(self.sp_to_dest)

    def edges(self) -> list[tuple[int, int, float, int]]:
        return [(u, e.head, e.req_weight, e.dist) for u in sorted(self.out_edges) for e in self.out_edges[u]]

    def topological_order(self) -> list[int]:
        # distance to the destination strictly decreases along every edge
        return sorted(self.sp_to_dest, key=lambda v: (-self.sp_to_dest[v], v))

    @property
    def sp_source_dest(self) -> int:
        return self.sp_to_dest[self.source]


@dataclass
class DpTable:
    """``(cell, length) -> (value, predecessor state)`` for backtracking."""

    length_budget: int
    entries: dict[tuple[int, int], tuple[float, tuple[int, int] | None]] = field(default_factory=dict)

    def best(self, v: int) -> tuple[int, float, tuple[int, int] | None] | None:
        """Highest-value state at ``v`` as ``(k, value, pred)``; ties to the smaller k."""
        cands = [(k, val, pred) for (u, k), (val, pred) in self.entries.items() if u == v]
        if not cands:
            return None
        return max(cands, key=lambda c: (c[1], -c[0]))

    def backtrack(self, state: tuple[int, int]) -> list[int]:
        cells = []
        cur: tuple[int, int] | None = state
        while cur is not None:
            cells.append(cur[0])
            cur = self.entries[cur][1]
        return cells[::-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("cell,k,value,pred_cell,pred_k\n")
        for (v, k), (val, pred) in sorted(self.entries.items()):
            pc, pk = ("", "") if pred is None else pred
            buf.write(f"{v},{k},{val:g},{pc},{pk}\n")
        return buf.getvalue()


def select_destination(req: RequestGraph, source: int) -> int:
    row = np.array(req.row(source), dtype=float)
    row[source] = 0.0
    best = int(np.argmax(row))  # argmax returns the first, i.e. lowest, index on ties
    if row[best] <= 0:
        raise NoDestinationError(f"no expected requests leave cell {source}")
    return best


def build_dag(road: RoadGraph, req: RequestGraph, o_s: int, o_d: int) -> Dag:
    if o_s == o_d:
        raise ValueError("source and destination must differ")
    to_dest = road.distances_from(o_d)
    limit = to_dest[o_s]
    if not np.isfinite(limit):
        raise ValueError(f"destination {o_d} unreachable from {o_s}")
    members = np.flatnonzero(to_dest <= limit)
    sp = {int(v): int(to_dest[v]) for v in members}
    out: dict[int, list[DagEdge]] = {}
    for u in sp:
        edges = []
        du = sp[u]
        for v, w in road.neighbors(u):
            dv = sp.get(v)
            if dv is not None and dv < du:
                edges.append(DagEdge(v, req.weight(u, v), w))
        if edges:
            out[u] = edges
    return Dag(o_s, o_d, sp, out)


def edge_feasible(x: int, d_i: int, sp_vj_dest: int, sp_src_dest: int, t_d: float) -> bool:
    if sp_src_dest <= 0:
        raise ValueError("shortest source-destination distance must be positive")
    return (x + d_i + sp_vj_dest) / sp_src_dest <= t_d


def detour_ratio(route_dist_between: int, sp: int) -> float:
    if sp <= 0:
        raise ValueError("shortest-path distance must be positive")
    return route_dist_between / sp


def length_budget(sp_src_dest: int, t_d: float) -> int:
    return math.floor(t_d * sp_src_dest)


def dp_table(dag: Dag, t_d: float) -> DpTable:
    if t_d < 1:
        raise ValueError("detour threshold must be at least 1")
    sp_sd = dag.sp_source_dest
    budget = length_budget(sp_sd, t_d)
    table = DpTable(budget)
    entries = table.entries
    entries[(dag.source, 0)] = (0.0, None)
    by_cell: dict[int, list[int]] = {dag.source: [0]}
    for u in dag.topological_order():
        ks = by_cell.get(u)
        if not ks:
            continue
        for k in sorted(ks):
            base = entries[(u, k)][0]
            for e in dag.out_edges.get(u, ()):
                kk = k + e.dist
                if kk > budget or not edge_feasible(e.dist, k, dag.sp_to_dest[e.head], sp_sd, t_d):
                    continue
                cand = base + e.req_weight
                key = (e.head, kk)
                cur = entries.get(key)
                if cur is None:
                    entries[key] = (cand, (u, k))
                    by_cell.setdefault(e.head, []).append(kk)
                elif cand > cur[0] or (cand == cur[0] and (u, k) < cur[1]):
                    entries[key] = (cand, (u, k))
    return table


def shortest_route(road: RoadGraph, req: RequestGraph, a: int, b: int) -> Route:
    cells = road.shortest_path(a, b)
    value = sum(req.weight(u, v) for u, v in zip(cells, cells[1:]))
    return Route(tuple(cells), road.path_length(cells), value)


def dp_solve(dag: Dag, road: RoadGraph, t_d: float, req: RequestGraph | None = None) -> Route:
    table = dp_table(dag, t_d)
    best = table.best(dag.dest)
    if best is None:
        # the shortest path has ratio 1, so this only triggers on degenerate inputs
        cells = road.shortest_path(dag.source, dag.dest)
        weights = {(u, e.head): e.req_weight for u, es in dag.out_edges.items() for e in es}
        value = sum(weights.get((u, v), req.weight(u, v) if req else 0.0) for u, v in zip(cells, cells[1:]))
        return Route(tuple(cells), road.path_length(cells), value)
    k, value, _ = best
    cells = table.backtrack((dag.dest, k))
    return Route(tuple(cells), k, value)


def greedy_route(req: RequestGraph, road: RoadGraph, source: int, dest: int, t_d: float) -> Route:
    """Follow the heaviest feasible forward edge at every step."""
    dag = build_dag(road, req, source, dest)
    sp_sd = dag.sp_source_dest
    cells = [source]
    k = 0
    value = 0.0
    cur = source
    while cur != dest:
        best = None
        for e in dag.out_edges.get(cur, ()):
            if not edge_feasible(e.dist, k, dag.sp_to_dest[e.head], sp_sd, t_d):
                continue
            if best is None or e.req_weight > best.req_weight:
                best = e
        if best is None:
            tail = road.shortest_path(cur, dest)
            for u, v in zip(tail, tail[1:]):
                value += req.weight(u, v)
                k += road.weight(u, v)
                cells.append(v)
            break
        cells.append(best.head)
        k += best.dist
        value += best.req_weight
        cur = best.head
    return Route(tuple(cells), k, value)


def path_request_count(req: RequestGraph, route: Route | list[int] | tuple[int, ...]) -> float:
    """Expected requests between every earlier and later cell of the route."""
    cells = route.cells if isinstance(route, Route) else tuple(route)
    total = 0.0
    for i, a in enumerate(cells):
        for b in cells[i + 1:]:
            if a != b:
                total += req.weight(a, b)
    return total


def recommend(road: RoadGraph, req: RequestGraph, source: int, t_d: float, planner: str = "dp") -> Route:
    """Destination selection followed by DP (or greedy) routing.

    Raises :class:`NoDestinationError` when nothing leaves ``source``.
    """
    dest = select_destination(req, source)
    if planner == "dp":
        return dp_solve(build_dag(road, req, source, dest), road, t_d, req)
    if planner == "greedy":
        return greedy_route(req, road, source, dest, t_d)
    raise ValueError(f"unknown planner {planner!r}")
