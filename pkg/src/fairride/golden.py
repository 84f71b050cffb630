"""Worked-example fixtures and their committed expected outputs."""

from __future__ import annotations

import difflib
import io
from importlib import resources
from pathlib import Path

from .demand import RequestGraph
from .grid import RoadGraph, load_edge_list
from .matching import Driver, OrderRejected, RideOrder, advance, try_accept
from .planner import build_dag, detour_ratio, dp_solve, dp_table, edge_feasible, path_request_count, select_destination
from .planner import Route

FIXTURES = resources.files("fairride") / "fixtures"

# cells are 0-based; label i as g_(i+1) to match the worked example
P1 = (0, 1, 2, 3, 5)
P2 = (0, 4, 5)
P3 = (0, 6, 7, 5)
WALKTHROUGH_ORDERS = {0: [(0, 5), (0, 5), (0, 6)], 6: [(6, 0), (6, 7)], 7: [(7, 5), (7, 5)]}


def label(cell: int) -> str:
    return f"g{cell + 1}"


def read_request_file(path) -> RequestGraph:
    n = None
    pairs: dict[tuple[int, int], float] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        if line[0] == "cells":
            n = int(line[1])
            continue
        pairs[(int(line[0]), int(line[1]))] = float(line[2])
    if n is None:
        raise ValueError(f"{path}: missing 'cells m' header")
    return RequestGraph.from_pairs(n, pairs)


def toy() -> tuple[RoadGraph, RequestGraph]:
    with resources.as_file(FIXTURES / "toy_road.txt") as road_path, resources.as_file(FIXTURES / "toy_requests.txt") as req_path:
        return load_edge_list(road_path), read_request_file(req_path)


def dp_trace(t_d: float = 1.5) -> str:
    road, req = toy()
    dest = select_destination(req, 0)
    dag = build_dag(road, req, 0, dest)
    table = dp_table(dag, t_d)
    route = dp_solve(dag, road, t_d)
    buf = io.StringIO()
    buf.write("v,k,e,pred\n")
    for v in dag.topological_order():
        best = table.best(v)
        if best is None:
            continue
        k, value, pred = best
        buf.write(f"{label(v)},{k},{value:g},{'-' if pred is None else label(pred[0])}\n")
    buf.write(f"route,{' '.join(label(c) for c in route.cells)},{route.expected_requests:g},{route.total_dist}\n")
    return buf.getvalue()


def toy_paths(t_d: float = 1.5) -> str:
    road, req = toy()
    sp = road.shortest_path_len(0, 5)
    buf = io.StringIO()
    buf.write("path,cells,expected_requests,length,detour_ratio,feasible\n")
    for name, cells in (("P1", P1), ("P2", P2), ("P3", P3)):
        length = road.path_length(list(cells))
        ok = True
        travelled = 0
        for u, v in zip(cells, cells[1:]):
            x = road.weight(u, v)
            ok = ok and edge_feasible(x, travelled, road.shortest_path_len(v, 5), sp, t_d)
            travelled += x
        buf.write(f"{name},{' '.join(label(c) for c in cells)},{path_request_count(req, cells):g},{length},{detour_ratio(length, sp):g},{ok}\n")
    return buf.getvalue()


def walkthrough(capacity: int = 3, t_d: float = 1.5) -> str:
    road, _ = toy()
    driver = Driver(0, 0)
    driver.set_route(Route(P3, road.path_length(list(P3)), 2.0))
    buf = io.StringIO()
    buf.write("cell,order,decision,reason\n")
    next_id = 0
    while True:
        for o, d in WALKTHROUGH_ORDERS.get(driver.cell, []):
            order = RideOrder(next_id, o, d, 0, t_d)
            next_id += 1
            try:
                try_accept(driver, order, road, capacity)
                buf.write(f"{label(driver.cell)},{label(o)}->{label(d)},accept,\n")
            except OrderRejected as rej:
                buf.write(f"{label(driver.cell)},{label(o)}->{label(d)},reject,{rej.reason}\n")
        moved = advance(driver, road)
        if moved is None:
            break
        for order in moved.dropped:
            buf.write(f"{label(moved.dst)},{label(order.origin)}->{label(order.dest)},dropoff,{order.distance_travelled}\n")
    return buf.getvalue()


GOLDENS = {
    "dp_trace": dp_trace,
    "toy_paths": toy_paths,
    "walkthrough": walkthrough,
}


def expected(name: str) -> str:
    return (FIXTURES / "expected" / f"{name}.csv").read_text()


def check(name: str) -> tuple[bool, str]:
    """Run a fixture; returns (passed, unified diff against the expected file)."""
    if name not in GOLDENS:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(GOLDENS)}")
    got = GOLDENS[name]()
    want = expected(name)
    if got == want:
        return True, ""
    diff = difflib.unified_diff(want.splitlines(True), got.splitlines(True), f"expected/{name}.csv", f"actual/{name}.csv")
    return False, "".join(diff)
