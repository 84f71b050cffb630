"""Discrete-time fleet simulation.

Each 15-minute slice: expire stale orders, spawn the slice's requests, snapshot
driver incomes, relocate low earners (fairness policy only), then run the
movement ticks.  Every tick hands routes to drivers that need one, offers
waiting orders to drivers standing on their origin cell, and moves every driver
one cell.  Drivers are served in ascending utility-per-hour order under the
fairness policy and in id order otherwise.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from .config import WorldConfig
from .demand import (
    GeoBounds,
    HistoricalAveragePredictor,
    Hotspot,
    OracleReplayPredictor,
    RequestGraph,
    RideRequest,
    SyntheticProfile,
    TripReplay,
    rate_matrix,
    read_trip_csv,
    synth_demand,
)
from .economics import RideRecord, money, trip_fare, utility_per_hour
from .fairness import (
    IncomeSnapshot,
    fair_objective,
    gini,
    hour_weights,
    lorenz,
    priority_order,
    relocate,
)
from .grid import RoadGraph, build_grid, load_edge_list
from .matching import (
    Driver,
    DriverStatus,
    OrderRejected,
    OrderState,
    RideOrder,
    advance,
    try_accept,
)
from .planner import NoDestinationError, recommend

logger = logging.getLogger(__name__)

EVENT_FIELDS = ("tick", "driver", "event", "order", "cell", "reason")
METRIC_FIELDS = ("tick", "gini", "mean_upH", "min_upH", "max_upH", "objective")


class InvariantViolation(RuntimeError):
    pass


# --------------------------------------------------------------------------- demand sources


class SyntheticSource:
    def __init__(self, road: RoadGraph, cfg: WorldConfig):
        d = cfg.demand
        self.profile = SyntheticProfile(
            base_rate=d.base_rate,
            hotspots=tuple(Hotspot(h.cell, h.multiplier, h.radius) for h in d.hotspots),
            tod_curve=d.tod_curve,
            dest_decay=d.dest_decay,
        )
        self.seed = cfg.seed
        self._flat = rate_matrix(road, SyntheticProfile(d.base_rate, self.profile.hotspots, (1.0,), d.dest_decay), 0)

    def rates(self, s: int) -> np.ndarray:
        tod = self.profile.tod_curve
        return self._flat * tod[s % len(tod)]

    def slice(self, s: int) -> tuple[RequestGraph, RequestGraph, list[RideRequest]]:
        now, requests = synth_demand(self.rates(s), self.seed, s)
        return now, RequestGraph(self.rates(s + 1), s + 1), requests


class ReplaySource:
    def __init__(self, road: RoadGraph, cfg: WorldConfig):
        d = cfg.demand
        spec = cfg.grid
        report = read_trip_csv(d.trips_csv, spec, GeoBounds(*d.bounds))
        logger.info("ingested %d trips (%d out of bounds, %d malformed)", len(report.records), report.dropped_out_of_bounds, report.malformed)
        self.replay = TripReplay(report.records, datetime.fromisoformat(d.start), cfg.slice_minutes)
        self.n_cells = road.n_cells
        self.seed = cfg.seed
        self.kind = d.predictor

    def _predict(self, s: int) -> RequestGraph:
        start = self.replay.slice_start(s)
        if self.kind == "oracle":
            model = OracleReplayPredictor(self.n_cells, self.replay.slice_minutes).fit(self.replay.trips)
            return model.predict(start)
        history = self.replay.history_before(s)
        if not history:
            return RequestGraph.zeros(self.n_cells, start)
        model = HistoricalAveragePredictor(self.n_cells, self.replay.slice_minutes).fit(history)
        return model.predict(start)

    def slice(self, s: int):
        return self._predict(s), self._predict(s + 1), self.replay.requests(s, self.seed)


class ScriptedSource:
    """Fixed prediction plus an explicit order list (worked-example fixtures)."""

    def __init__(self, road: RoadGraph, cfg: WorldConfig):
        from .golden import read_request_file

        d = cfg.demand
        self.pred = read_request_file(d.requests_file) if d.requests_file else RequestGraph.zeros(road.n_cells)
        self.orders = d.orders

    def slice(self, s: int):
        reqs = [RideRequest(o, dst, t) for sl, o, dst, t in self.orders if sl == s]
        return self.pred, self.pred, reqs


def make_source(road: RoadGraph, cfg: WorldConfig):
    return {"synthetic": SyntheticSource, "csv": ReplaySource, "scripted": ScriptedSource}[cfg.demand.source](road, cfg)


def make_road(cfg: WorldConfig) -> RoadGraph:
    if cfg.road_file:
        return load_edge_list(cfg.road_file)
    return build_grid(cfg.grid, diagonal_weight=cfg.diagonal_weight)


# --------------------------------------------------------------------------- reports


@dataclass
class MetricsReport:
    policy: str
    seed: int
    gini_series: list[tuple[int, float]] = field(default_factory=list)
    metric_rows: list[dict] = field(default_factory=list)
    lorenz_points: list[tuple[float, float]] = field(default_factory=list)
    utilities: dict[int, Decimal] = field(default_factory=dict)
    utility_per_hour: dict[int, float] = field(default_factory=dict)
    rides: dict[int, int] = field(default_factory=dict)
    active_hours: float = 0.0
    waiting: dict[str, float] = field(default_factory=dict)
    spawned: int = 0
    completed: int = 0
    expired: int = 0
    max_onboard: int = 0
    max_detour_ratio: float = 0.0
    final_gini: float = 0.0

    @property
    def total_utility(self) -> Decimal:
        return sum(self.utilities.values(), Decimal("0.0000"))

    def summary(self) -> dict:
        return {
            "policy": self.policy,
            "seed": self.seed,
            "total_utility": str(self.total_utility),
            "final_gini": self.final_gini,
            "mean_wait_minutes": self.waiting.get("mean", 0.0),
            "p50_wait_minutes": self.waiting.get("p50", 0.0),
            "p90_wait_minutes": self.waiting.get("p90", 0.0),
            "spawned": self.spawned,
            "completed": self.completed,
            "expired": self.expired,
            "max_onboard": self.max_onboard,
            "max_detour_ratio": self.max_detour_ratio,
        }


def waiting_stats(events: Iterable[tuple], minutes_per_tick: float, expiry_minutes: float) -> dict[str, float]:
    """Waiting minutes from spawn to pickup; expired orders are counted apart."""
    spawn: dict[int, int] = {}
    waits: list[float] = []
    expired = 0
    for tick, _driver, kind, order, _cell, _reason in events:
        if kind == "spawn":
            spawn[int(order)] = int(tick)
        elif kind == "pickup":
            waits.append((int(tick) - spawn[int(order)]) * minutes_per_tick)
        elif kind == "expire":
            expired += 1
    arr = np.asarray(waits, dtype=float)
    return {
        "mean": float(arr.mean()) if arr.size else 0.0,
        "p50": float(np.percentile(arr, 50)) if arr.size else 0.0,
        "p90": float(np.percentile(arr, 90)) if arr.size else 0.0,
        "served": int(arr.size),
        "expired": expired,
        "expired_wait": float(expiry_minutes),
    }


# --------------------------------------------------------------------------- simulation


class Simulation:
    def __init__(self, cfg: WorldConfig, road: RoadGraph | None = None, source=None):
        self.cfg = cfg
        self.road = road if road is not None else make_road(cfg)
        self.source = source if source is not None else make_source(self.road, cfg)
        self.cell_miles = Decimal(str(cfg.grid.cell_size_miles))
        self.tick = 0
        self.slice = 0
        self.events: list[tuple] = []
        self.orders: dict[int, RideOrder] = {}
        self.waiting: dict[int, list[RideOrder]] = {}
        self._next_order = 0
        self._episode: dict[int, tuple[list[Decimal], int]] = {}
        self._deadhead: dict[int, int] = {}
        self.report = MetricsReport(cfg.policy, cfg.seed)
        self._upH_history: list[tuple[int, int, float]] = []
        self.drivers = self._place_drivers()

    def _place_drivers(self) -> list[Driver]:
        cfg = self.cfg
        if cfg.initial_cells is not None:
            cells = list(cfg.initial_cells)
        else:
            rng = np.random.default_rng([cfg.seed, 7919])
            cells = rng.integers(0, self.road.n_cells, size=cfg.fleet_size).tolist()
        drivers = []
        for i, c in enumerate(cells):
            if not 0 <= c < self.road.n_cells:
                raise ValueError(f"initial cell {c} outside the grid")
            drivers.append(Driver(i, int(c)))
            self._deadhead[i] = 0
        return drivers

    # ------------------------------------------------------------------ helpers

    def _log(self, driver, kind, order, cell, reason=""):
        self.events.append((self.tick, "" if driver is None else driver, kind, "" if order is None else order, cell, reason))

    def _hours(self) -> float:
        return self.tick * self.cfg.minutes_per_cell / 60.0

    def snapshot(self) -> IncomeSnapshot:
        hours = self._hours()
        rates = {}
        for d in self.drivers:
            d.ledger.active_hours = hours
            rates[d.id] = float(self._current_utility(d)) / hours if hours > 0 else 0.0
        return IncomeSnapshot.from_mapping(rates, self.tick)

    def _current_utility(self, d: Driver) -> Decimal:
        # booked rides minus the cost of empty driving not yet booked
        pending = money(money(self._deadhead[d.id] * self.cell_miles) * self.cfg.fare.cost_per_mile)
        return d.ledger.cumulative_utility - pending

    def _service_order(self, snap: IncomeSnapshot) -> list[Driver]:
        if self.cfg.policy == "fairness_on":
            ids = priority_order(snap)
        else:
            ids = sorted(d.id for d in self.drivers)
        return [self.drivers[i] for i in ids]

    def _flush_deadhead(self, d: Driver):
        units = self._deadhead[d.id]
        if units:
            d.ledger.record(RideRecord((), money(units * self.cell_miles)), self.cfg.fare.cost_per_mile)
            self._deadhead[d.id] = 0

    # ------------------------------------------------------------------ phases

    def _expire(self, horizon_ticks: int, force: bool = False):
        for cell in sorted(self.waiting):
            keep = []
            for o in self.waiting[cell]:
                if force or self.tick - o.created_tick >= horizon_ticks:
                    o.state = OrderState.EXPIRED
                    self._log(None, "expire", o.id, cell)
                else:
                    keep.append(o)
            self.waiting[cell] = keep

    def _spawn(self, requests: list[RideRequest]):
        for r in requests:
            o = RideOrder(self._next_order, r.origin, r.dest, self.tick, r.t_d)
            self._next_order += 1
            self.orders[o.id] = o
            self.waiting.setdefault(o.origin, []).append(o)
            self._log(None, "spawn", o.id, o.origin, f"dest={o.dest}")
        self.report.spawned += len(requests)

    def _relocate(self, snap: IncomeSnapshot, pred_now: RequestGraph, pred_next: RequestGraph):
        if self.cfg.policy != "fairness_on":
            return
        for d in self._service_order(snap):
            # only riderless drivers about to receive a fresh route
            if d.onboard or d.path or d.status is DriverStatus.RELOCATING:
                continue
            target = relocate(d.id, d.cell, snap, self.cfg.grid, pred_now, pred_next, self.cfg.relocate_fraction, self.cfg.future_threshold)
            if target is None or target == d.cell:
                continue
            d.path = self.road.shortest_path(d.cell, target)[1:]
            d.following_route = False
            d.route = None
            d.status = DriverStatus.RELOCATING
            d.target = target
            self._log(d.id, "relocate", None, target)

    def _recommend(self, order: list[Driver], pred: RequestGraph):
        planner = "greedy" if self.cfg.policy == "greedy" else "dp"
        for d in order:
            if not d.needs_route:
                continue
            try:
                route = recommend(self.road, pred, d.cell, self.cfg.route_detour, planner)
            except NoDestinationError:
                continue
            d.set_route(route)

    def _offer(self, order: list[Driver]):
        for d in order:
            queue = self.waiting.get(d.cell)
            if not queue:
                continue
            keep = []
            for o in queue:
                was_empty = not d.onboard
                try:
                    try_accept(d, o, self.road, self.cfg.capacity)
                except OrderRejected as rej:
                    self._log(d.id, "reject", o.id, d.cell, rej.reason)
                    keep.append(o)
                    continue
                if was_empty:
                    self._flush_deadhead(d)
                    self._episode[d.id] = ([], 0)
                d.target = None
                o.pickup_tick = self.tick
                self._log(d.id, "pickup", o.id, d.cell)
            self.waiting[d.cell] = keep
            if len(d.onboard) > self.cfg.capacity:
                raise InvariantViolation(f"driver {d.id} carries {len(d.onboard)} > capacity {self.cfg.capacity}")
            self.report.max_onboard = max(self.report.max_onboard, len(d.onboard))

    def _move(self):
        cfg = self.cfg
        for d in self.drivers:
            loaded = bool(d.onboard)
            res = advance(d, self.road)
            if res is None:
                continue
            self._log(d.id, "move", None, res.dst, str(res.dist))
            if loaded:
                fares, units = self._episode[d.id]
                self._episode[d.id] = (fares, units + res.dist)
            else:
                self._deadhead[d.id] += res.dist
            for o in res.dropped:
                sp = self.road.shortest_path_len(o.origin, o.dest)
                ratio = o.distance_travelled / sp
                if ratio > o.t_d:
                    raise InvariantViolation(f"order {o.id} detour {ratio:.3f} exceeds {o.t_d:.3f}")
                self.report.max_detour_ratio = max(self.report.max_detour_ratio, ratio)
                o.dropoff_tick = self.tick
                fare = trip_fare(cfg.fare, o.distance_travelled * self.cell_miles, o.cells_travelled * cfg.minutes_per_cell)
                self._episode[d.id][0].append(fare)
                self.report.completed += 1
                self._log(d.id, "dropoff", o.id, res.dst, str(fare))
            if res.dropped and not d.onboard:
                fares, units = self._episode.pop(d.id)
                d.ledger.record(RideRecord(tuple(fares), money(units * self.cell_miles)), cfg.fare.cost_per_mile)
            if d.status is DriverStatus.RELOCATING and d.cell == d.target:
                d.status = DriverStatus.IDLE
                d.target = None

    # ------------------------------------------------------------------ driving loop

    def step(self):
        """Advance one time slice."""
        cfg = self.cfg
        s = self.slice
        self._expire(cfg.expiry_slices * cfg.ticks_per_slice)
        pred_now, pred_next, requests = self.source.slice(s)
        self._spawn(requests)
        snap = self.snapshot()
        self._relocate(snap, pred_now, pred_next)
        order = self._service_order(snap)
        for _ in range(cfg.ticks_per_slice):
            self._recommend(order, pred_now)
            self._offer(order)
            self._move()
            self.tick += 1
        self.slice += 1
        self._record_metrics()

    def _record_metrics(self):
        snap = self.snapshot()
        rates = snap.as_dict()
        hour = ((self.slice - 1) * self.cfg.slice_minutes) // 60
        self._upH_history.extend((d, hour, r) for d, r in rates.items())
        values = list(rates.values())
        if not values:
            return
        g = gini(values)
        weights = hour_weights(self._upH_history, hour, rates.keys())
        row = {
            "tick": self.tick,
            "gini": g,
            "mean_upH": float(np.mean(values)),
            "min_upH": float(np.min(values)),
            "max_upH": float(np.max(values)),
            "objective": fair_objective({d: float(self._current_utility(self.drivers[d])) for d in rates}, weights),
        }
        self.report.metric_rows.append(row)
        self.report.gini_series.append((self.tick, g))

    def drain(self, max_ticks: int = 10_000):
        """Finish onboard trips after the horizon; no new offers or routes."""
        for _ in range(max_ticks):
            if not any(d.onboard for d in self.drivers):
                break
            for d in self.drivers:
                if not d.onboard:
                    d.path = []
                    d.following_route = False
            self._move()
            self.tick += 1
        else:  # pragma: no cover
            raise InvariantViolation("onboard orders never completed")
        self._expire(0, force=True)

    def run(self) -> MetricsReport:
        cfg = self.cfg
        for _ in range(cfg.duration_slices):
            self.step()
        self.drain()
        hours = cfg.duration_slices * cfg.slice_minutes / 60.0
        for d in self.drivers:
            self._flush_deadhead(d)
            d.ledger.active_hours = hours
        rep = self.report
        rep.active_hours = hours
        rep.utilities = {d.id: d.ledger.cumulative_utility for d in self.drivers}
        rep.utility_per_hour = {d.id: utility_per_hour(d.ledger) for d in self.drivers}
        rep.rides = {d.id: d.ledger.n_rides for d in self.drivers}
        if self.drivers:
            rep.lorenz_points = lorenz(list(rep.utility_per_hour.values()))
            rep.final_gini = gini(list(rep.utility_per_hour.values()))
        rep.expired = sum(1 for e in self.events if e[2] == "expire")
        rep.waiting = waiting_stats(self.events, cfg.minutes_per_cell, cfg.expiry_slices * cfg.slice_minutes)
        unfinished = [o.id for o in self.orders.values() if o.state not in (OrderState.COMPLETED, OrderState.EXPIRED)]
        if unfinished:
            raise InvariantViolation(f"orders without terminal state: {unfinished[:5]}")
        return rep


def run(cfg: WorldConfig, out_dir: str | Path | None = None, manifest_extra: dict | None = None) -> MetricsReport:
    sim = Simulation(cfg)
    report = sim.run()
    if out_dir is not None:
        write_outputs(sim, report, Path(out_dir), manifest_extra or {})
    return report


# --------------------------------------------------------------------------- outputs


def events_csv(events: list[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENT_FIELDS)
    w.writerows(events)
    return buf.getvalue()


def read_events(path: str | Path) -> list[tuple]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return [tuple(r) for r in rows[1:]]


def write_outputs(sim: Simulation, report: MetricsReport, out: Path, manifest_extra: dict):
    out.mkdir(parents=True, exist_ok=True)
    cfg = sim.cfg
    (out / "events.csv").write_text(events_csv(sim.events))
    with open(out / "metrics.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, METRIC_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in report.metric_rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    with open(out / "lorenz.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("population_share", "income_share"))
        w.writerows((repr(a), repr(b)) for a, b in report.lorenz_points)
    with open(out / "ledger.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("driver", "rides", "utility", "active_hours", "utility_per_hour"))
        for d in sim.drivers:
            w.writerow((d.id, d.ledger.n_rides, str(d.ledger.cumulative_utility), repr(d.ledger.active_hours), repr(utility_per_hour(d.ledger))))
    summary = report.summary()
    summary["config_hash"] = cfg.hash()
    summary["demand_hash"] = cfg.demand_hash()
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    manifest = {
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "demand_hash": cfg.demand_hash(),
        "seed": cfg.seed,
        "policy": cfg.policy,
        "output_dir": str(out),
        "version": __version__,
    }
    manifest.update(manifest_extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def replay_utilities(events: Iterable[tuple], cfg: WorldConfig) -> dict[int, Decimal]:
    """Rebuild every driver's cumulative utility from the event log alone."""
    from .economics import DriverLedger

    cell_miles = Decimal(str(cfg.grid.cell_size_miles))
    onboard: dict[int, dict[int, list[int]]] = {}
    episode: dict[int, tuple[list[Decimal], int]] = {}
    deadhead: dict[int, int] = {}
    ledgers: dict[int, DriverLedger] = {}

    def flush(d):
        if deadhead.get(d):
            ledgers[d].record(RideRecord((), money(deadhead[d] * cell_miles)), cfg.fare.cost_per_mile)
            deadhead[d] = 0

    for _tick, driver, kind, order, _cell, reason in events:
        if driver == "" or driver is None:
            continue
        d = int(driver)
        ledgers.setdefault(d, DriverLedger())
        riders = onboard.setdefault(d, {})
        if kind == "pickup":
            if not riders:
                flush(d)
                episode[d] = ([], 0)
            riders[int(order)] = [0, 0]
        elif kind == "move":
            x = int(reason)
            if riders:
                fares, units = episode[d]
                episode[d] = (fares, units + x)
                for acc in riders.values():
                    acc[0] += x
                    acc[1] += 1
            else:
                deadhead[d] = deadhead.get(d, 0) + x
        elif kind == "dropoff":
            dist, cells = riders.pop(int(order))
            episode[d][0].append(trip_fare(cfg.fare, dist * cell_miles, cells * cfg.minutes_per_cell))
            if not riders:
                fares, units = episode.pop(d)
                ledgers[d].record(RideRecord(tuple(fares), money(units * cell_miles)), cfg.fare.cost_per_mile)
    for d in ledgers:
        flush(d)
    return {d: l.cumulative_utility for d, l in ledgers.items()}
