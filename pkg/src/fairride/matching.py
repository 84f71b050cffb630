"""Order acceptance under capacity and detour constraints, and driver movement.

Orders are offered when a driver stands on their origin cell, so a pickup is
always immediate.  Accepting an order means finding an ordering of all pending
dropoffs such that every onboard rider, including the new one, stays within its
detour threshold.  Legs that end at a cell still ahead on the recommended
route follow the route; other legs take shortest paths.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Sequence

from .economics import DriverLedger
from .grid import RoadGraph
from .planner import Route


class OrderState(str, enum.Enum):
    WAITING = "waiting"
    ONBOARD = "onboard"
    COMPLETED = "completed"
    EXPIRED = "expired"


class DriverStatus(str, enum.Enum):
    IDLE = "idle"
    RELOCATING = "relocating"
    SERVING = "serving"


@dataclass(eq=False)
class RideOrder:
    id: int
    origin: int
    dest: int
    created_tick: int
    t_d: float = 1.5
    state: OrderState = OrderState.WAITING
    driver: int | None = None
    pickup_tick: int | None = None
    dropoff_tick: int | None = None
    distance_travelled: int = 0
    cells_travelled: int = 0

    def __post_init__(self):
        if self.origin == self.dest:
            raise ValueError(f"order {self.id}: origin equals destination")
        if self.t_d < 1:
            raise ValueError(f"order {self.id}: detour threshold below 1")


@dataclass(frozen=True)
class Stop:
    cell: int
    order_id: int
    at_step: int  # moves from plan creation until the stop is reached
    kind: str = "dropoff"


@dataclass
class StopPlan:
    stops: list[Stop] = field(default_factory=list)
    projected: dict[int, int] = field(default_factory=dict)

    def __bool__(self):
        return bool(self.stops)


@dataclass(eq=False)
class Driver:
    id: int
    cell: int
    path: list[int] = field(default_factory=list)
    following_route: bool = False
    route: Route | None = None
    onboard: list[RideOrder] = field(default_factory=list)
    plan: StopPlan = field(default_factory=StopPlan)
    steps_since_plan: int = 0
    ledger: DriverLedger = field(default_factory=DriverLedger)
    status: DriverStatus = DriverStatus.IDLE
    target: int | None = None
    on_duty_since: int = 0

    @property
    def needs_route(self) -> bool:
        return not self.path and not self.onboard and self.status is not DriverStatus.RELOCATING

    def set_route(self, route: Route):
        if route.cells[0] != self.cell:
            raise ValueError(f"route starts at {route.cells[0]}, driver {self.id} is at {self.cell}")
        self.route = route
        self.path = list(route.cells[1:])
        self.following_route = True


class OrderRejected(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass
class _Candidate:
    path: list[int]
    stops: list[Stop]
    arrivals: dict[int, int]
    total: int
    on_route: bool


def _plan_path(road: RoadGraph, start: int, seq: Sequence[tuple[int, int]], route_ahead: Sequence[int]) -> _Candidate:
    path: list[int] = []
    stops: list[Stop] = []
    arrivals: dict[int, int] = {}
    pos = start
    dist = 0
    ri = 0
    on_route = bool(route_ahead)
    for cell, oid in seq:
        if cell != pos:
            if on_route and cell in route_ahead[ri:]:
                j = route_ahead.index(cell, ri)
                leg = list(route_ahead[ri:j + 1])
                ri = j + 1
            else:
                on_route = False
                leg = road.shortest_path(pos, cell)[1:]
            for v in leg:
                dist += road.weight(pos, v)
                pos = v
            path.extend(leg)
        arrivals[oid] = dist
        stops.append(Stop(cell, oid, len(path)))
    total = dist
    if on_route:
        path.extend(route_ahead[ri:])
    return _Candidate(path, stops, arrivals, total, on_route)


def _within_detour(road: RoadGraph, order: RideOrder, distance: int) -> bool:
    sp = road.shortest_path_len(order.origin, order.dest)
    return distance / sp <= order.t_d


def try_accept(driver: Driver, order: RideOrder, road: RoadGraph, capacity: int) -> StopPlan:
    """Accept ``order`` into ``driver``'s plan or raise :class:`OrderRejected`.

    On acceptance the driver's path and plan are replaced and the order is
    boarded; the caller owns event logging.
    """
    if order.state is not OrderState.WAITING:
        raise ValueError(f"order {order.id} is {order.state.value}")
    if order.origin != driver.cell:
        raise ValueError(f"order {order.id} originates at {order.origin}, driver {driver.id} is at {driver.cell}")
    if len(driver.onboard) >= capacity:
        raise OrderRejected("capacity")

    riders = {o.id: o for o in driver.onboard}
    riders[order.id] = order
    pending = [(s.cell, s.order_id) for s in driver.plan.stops]
    pending.append((order.dest, order.id))
    route_ahead = driver.path if driver.following_route else []

    best_route: _Candidate | None = None
    best_other: _Candidate | None = None
    for seq in itertools.permutations(pending):
        variants = [_plan_path(road, driver.cell, seq, route_ahead)]
        if route_ahead:
            variants.append(_plan_path(road, driver.cell, seq, ()))
        for cand in variants:
            # a stop on the current cell would need a zero-step dropoff
            if any(st.at_step == 0 for st in cand.stops):
                continue
            ok = all(
                _within_detour(road, o, o.distance_travelled + cand.arrivals[oid])
                for oid, o in riders.items()
            )
            if not ok:
                continue
            follows = bool(route_ahead) and cand.on_route
            if follows:
                if best_route is None or cand.total < best_route.total:
                    best_route = cand
            elif best_other is None or cand.total < best_other.total:
                best_other = cand
    chosen = best_route or best_other
    if chosen is None:
        raise OrderRejected("detour")

    driver.path = chosen.path
    driver.following_route = bool(route_ahead) and chosen.on_route
    if not driver.following_route:
        driver.route = None
    driver.plan = StopPlan(chosen.stops, {oid: riders[oid].distance_travelled + d for oid, d in chosen.arrivals.items()})
    driver.steps_since_plan = 0
    driver.onboard.append(order)
    driver.status = DriverStatus.SERVING
    order.state = OrderState.ONBOARD
    order.driver = driver.id
    return driver.plan


class PlanInconsistencyError(RuntimeError):
    pass


@dataclass(frozen=True)
class MoveResult:
    src: int
    dst: int
    dist: int
    dropped: tuple[RideOrder, ...]


def advance(driver: Driver, road: RoadGraph) -> MoveResult | None:
    """Move one cell along the driver's path; None when there is nowhere to go."""
    if not driver.path:
        if driver.plan:
            raise PlanInconsistencyError(f"driver {driver.id} has pending stops but no path")
        return None
    src = driver.cell
    dst = driver.path.pop(0)
    if not road.has_edge(src, dst):
        raise PlanInconsistencyError(f"driver {driver.id}: {src} -> {dst} is not a road edge")
    x = road.weight(src, dst)
    driver.cell = dst
    for o in driver.onboard:
        o.distance_travelled += x
        o.cells_travelled += 1
    driver.steps_since_plan += 1
    dropped = []
    while driver.plan.stops and driver.plan.stops[0].at_step == driver.steps_since_plan:
        stop = driver.plan.stops.pop(0)
        if stop.cell != dst:
            raise PlanInconsistencyError(f"driver {driver.id}: stop for order {stop.order_id} expected at {stop.cell}, reached {dst}")
        order = next(o for o in driver.onboard if o.id == stop.order_id)
        if order.distance_travelled != driver.plan.projected.get(order.id, order.distance_travelled):
            raise PlanInconsistencyError(f"order {order.id}: travelled {order.distance_travelled}, projected {driver.plan.projected[order.id]}")
        driver.onboard.remove(order)
        order.state = OrderState.COMPLETED
        dropped.append(order)
    if driver.plan.stops and driver.plan.stops[0].at_step < driver.steps_since_plan:
        raise PlanInconsistencyError(f"driver {driver.id} passed a planned stop")
    if not driver.onboard:
        driver.plan = StopPlan()
        if driver.status is DriverStatus.SERVING:
            driver.status = DriverStatus.IDLE
    return MoveResult(src, dst, x, tuple(dropped))
