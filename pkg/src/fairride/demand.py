"""Origin-destination demand: trip ingestion, prediction and synthetic workloads.

A :class:`RequestGraph` holds the expected number of requests between every
ordered pair of cells for one 15-minute slice.  Predictors follow the
scikit-learn estimator protocol (``fit`` on trip records, ``predict`` a slice).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .grid import GridSpec, RoadGraph

logger = logging.getLogger(__name__)

SLICE_MINUTES = 15
SLICES_PER_DAY = 24 * 60 // SLICE_MINUTES

TRIP_COLUMNS = (
    "pickup_datetime",
    "pickup_lat",
    "pickup_lon",
    "dropoff_lat",
    "dropoff_lon",
    "passenger_count",
)


class EmptyTripSetError(ValueError):
    pass


@dataclass(frozen=True)
class TripRecord:
    pickup_time: datetime
    pickup_cell: int
    dropoff_cell: int
    passenger_count: int = 1


@dataclass(frozen=True)
class GeoBounds:
    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float

    def __post_init__(self):
        if not (self.max_lat > self.min_lat and self.max_lon > self.min_lon):
            raise ValueError("bounding box must be nonempty")

    def cell_of(self, lat: float, lon: float, spec: GridSpec) -> int | None:
        """Row-major cell of a point, or None when outside the box.

        Bins are half-open, so a point on an interior boundary falls in the
        higher-index cell; the max edge of the box is folded into the last bin.
        """
        if not (self.min_lat <= lat <= self.max_lat and self.min_lon <= lon <= self.max_lon):
            return None
        row = int((lat - self.min_lat) / (self.max_lat - self.min_lat) * spec.rows)
        col = int((lon - self.min_lon) / (self.max_lon - self.min_lon) * spec.cols)
        return spec.cell(min(row, spec.rows - 1), min(col, spec.cols - 1))


class RequestGraph:
    """Expected request counts ``w[i, j]`` for one time slice.

    Accepts a dense array or any scipy sparse matrix; self-loops are zeroed.
    """

    def __init__(self, weights, slice_start: datetime | int | None = None):
        if sparse.issparse(weights):
            w = sparse.csr_array(weights, dtype=float)
            w.setdiag(0)
            w.eliminate_zeros()
            if w.nnz and w.data.min() < 0:
                raise ValueError("request weights must be nonnegative")
        else:
            w = np.array(weights, dtype=float)
            if w.ndim != 2 or w.shape[0] != w.shape[1]:
                raise ValueError(f"request weights must be square, got shape {w.shape}")
            if (w < 0).any():
                raise ValueError("request weights must be nonnegative")
            np.fill_diagonal(w, 0.0)
        self._w = w
        self.slice_start = slice_start
        self._out_totals = None

    @classmethod
    def zeros(cls, n_cells: int, slice_start=None, dense: bool = True) -> RequestGraph:
        if dense:
            return cls(np.zeros((n_cells, n_cells)), slice_start)
        return cls(sparse.csr_array((n_cells, n_cells)), slice_start)

    @classmethod
    def from_pairs(cls, n_cells: int, pairs: dict[tuple[int, int], float], slice_start=None) -> RequestGraph:
        w = np.zeros((n_cells, n_cells))
        for (i, j), x in pairs.items():
            w[i, j] += x
        return cls(w, slice_start)

    @property
    def n_cells(self) -> int:
        return self._w.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self._w)

    def weight(self, i: int, j: int) -> float:
        return float(self._w[i, j])

    def row(self, i: int) -> np.ndarray:
        if self.is_sparse:
            return self._w[[i], :].toarray().ravel()
        return self._w[i]

    def out_totals(self) -> np.ndarray:
        if self._out_totals is None:
            self._out_totals = np.asarray(self._w.sum(axis=1)).ravel()
        return self._out_totals

    def toarray(self) -> np.ndarray:
        return self._w.toarray() if self.is_sparse else self._w.copy()

    def pairs(self) -> dict[tuple[int, int], float]:
        coo = sparse.coo_array(self._w)
        return {(int(i), int(j)): float(x) for i, j, x in zip(coo.row, coo.col, coo.data) if x}

    def __eq__(self, other):
        if not isinstance(other, RequestGraph):
            return NotImplemented
        return np.array_equal(self.toarray(), other.toarray())

    def __repr__(self):
        return f"RequestGraph(n_cells={self.n_cells}, total={self.out_totals().sum():g}, slice_start={self.slice_start!r})"


def slice_index(ts: datetime, slice_minutes: int = SLICE_MINUTES) -> int:
    return (ts.hour * 60 + ts.minute) // slice_minutes


def floor_to_slice(ts: datetime, slice_minutes: int = SLICE_MINUTES) -> datetime:
    minute = (ts.minute // slice_minutes) * slice_minutes
    return ts.replace(minute=minute, second=0, microsecond=0)


# --------------------------------------------------------------------------- ingestion


@dataclass
class IngestReport:
    records: list[TripRecord]
    dropped_out_of_bounds: int = 0
    dropped_zero_length: int = 0
    malformed: int = 0


def ingest_trips(rows: Iterable[dict | Sequence], spec: GridSpec, bounds: GeoBounds) -> IngestReport:
    """Bin raw trip rows onto the grid.

    ``rows`` may be mappings keyed by the trip CSV columns or plain sequences
    in column order.  Malformed rows are counted and skipped.
    """
    report = IngestReport(records=[])
    for row in rows:
        if not isinstance(row, dict):
            row = dict(zip(TRIP_COLUMNS, row))
        try:
            ts = row["pickup_datetime"]
            if not isinstance(ts, datetime):
                ts = datetime.fromisoformat(str(ts).strip())
            plat, plon = float(row["pickup_lat"]), float(row["pickup_lon"])
            dlat, dlon = float(row["dropoff_lat"]), float(row["dropoff_lon"])
            count = int(row.get("passenger_count") or 1)
            if count < 1:
                raise ValueError("passenger_count must be >= 1")
        except (KeyError, TypeError, ValueError) as exc:
            report.malformed += 1
            logger.warning("skipping malformed trip row %r: %s", row, exc)
            continue
        a = bounds.cell_of(plat, plon, spec)
        b = bounds.cell_of(dlat, dlon, spec)
        if a is None or b is None:
            report.dropped_out_of_bounds += 1
            continue
        if a == b:
            report.dropped_zero_length += 1
            continue
        report.records.append(TripRecord(ts, a, b, count))
    if not report.records:
        raise EmptyTripSetError("no usable trip records after binning")
    return report


def read_trip_csv(path, spec: GridSpec, bounds: GeoBounds) -> IngestReport:
    with open(path, newline="") as fh:
        return ingest_trips(csv.DictReader(fh), spec, bounds)


# --------------------------------------------------------------------------- predictors


def _count_matrix(records: Iterable[TripRecord], n_cells: int) -> np.ndarray:
    counts = np.zeros((n_cells, n_cells))
    for r in records:
        counts[r.pickup_cell, r.dropoff_cell] += 1
    return counts


class HistoricalAveragePredictor(BaseEstimator):
    """Slice-of-day mean of past origin-destination counts.

    The prediction for a slice is, for every pair, the mean trip count over
    all earlier calendar days at the same slice-of-day (days without trips
    count as zero).  With ``horizon_slices > 1`` the per-slice means of the
    following slices are summed.
    """

    def __init__(self, n_cells: int, slice_minutes: int = SLICE_MINUTES, horizon_slices: int = 1):
        self.n_cells = n_cells
        self.slice_minutes = slice_minutes
        self.horizon_slices = horizon_slices

    def fit(self, trips: Sequence[TripRecord], y=None):
        if not trips:
            raise EmptyTripSetError("history is empty")
        by_key: dict[tuple, list[TripRecord]] = {}
        for t in trips:
            key = (t.pickup_time.date(), slice_index(t.pickup_time, self.slice_minutes))
            by_key.setdefault(key, []).append(t)
        self.counts_ = {k: _count_matrix(v, self.n_cells) for k, v in by_key.items()}
        self.first_day_ = min(t.pickup_time.date() for t in trips)
        return self

    def predict(self, slice_start: datetime) -> RequestGraph:
        check_is_fitted(self, "counts_")
        if self.horizon_slices < 1:
            raise ValueError("horizon_slices must be positive")
        total = np.zeros((self.n_cells, self.n_cells))
        for h in range(self.horizon_slices):
            ts = slice_start + timedelta(minutes=h * self.slice_minutes)
            n_days = (ts.date() - self.first_day_).days
            if n_days <= 0:
                continue
            sidx = slice_index(ts, self.slice_minutes)
            acc = np.zeros_like(total)
            for d in range(n_days):
                day = self.first_day_ + timedelta(days=d)
                m = self.counts_.get((day, sidx))
                if m is not None:
                    acc += m
            total += acc / n_days
        return RequestGraph(total, slice_start)


class OracleReplayPredictor(BaseEstimator):
    """Returns the actual counts of the requested slice (perfect foresight)."""

    def __init__(self, n_cells: int, slice_minutes: int = SLICE_MINUTES):
        self.n_cells = n_cells
        self.slice_minutes = slice_minutes

    def fit(self, trips: Sequence[TripRecord], y=None):
        self.trips_ = list(trips)
        return self

    def predict(self, slice_start: datetime) -> RequestGraph:
        check_is_fitted(self, "trips_")
        end = slice_start + timedelta(minutes=self.slice_minutes)
        sel = [t for t in self.trips_ if slice_start <= t.pickup_time < end]
        return RequestGraph(_count_matrix(sel, self.n_cells), slice_start)


def predict(history: Sequence[TripRecord], slice_start: datetime, horizon_slices: int = 1, n_cells: int | None = None) -> RequestGraph:
    if n_cells is None:
        n_cells = 1 + max(max(t.pickup_cell, t.dropoff_cell) for t in history)
    model = HistoricalAveragePredictor(n_cells, horizon_slices=horizon_slices).fit(history)
    return model.predict(slice_start)


# --------------------------------------------------------------------------- synthetic workloads


@dataclass(frozen=True)
class Hotspot:
    cell: int
    multiplier: float
    radius: float = 2.0


@dataclass(frozen=True)
class SyntheticProfile:
    """Per-cell origin intensity and destination attraction.

    Origin intensity of cell ``i`` is ``base_rate * (1 + sum_h m_h *
    exp(-SP(i, h) / r_h)) * tod[slice % len(tod)]``; destinations are drawn in
    proportion to the same spatial profile damped by ``exp(-SP(i, j) / dest_decay)``.
    """

    base_rate: float = 0.02
    hotspots: tuple[Hotspot, ...] = ()
    tod_curve: tuple[float, ...] = (1.0,)
    dest_decay: float = 4.0

    def __post_init__(self):
        if self.base_rate < 0 or any(h.multiplier < 0 for h in self.hotspots) or any(x < 0 for x in self.tod_curve):
            raise ValueError("demand rates must be nonnegative")
        if not self.tod_curve:
            raise ValueError("tod_curve must not be empty")


@dataclass(frozen=True)
class RideRequest:
    """A generated request before it enters the simulator."""

    origin: int
    dest: int
    t_d: float


def spatial_profile(road: RoadGraph, profile: SyntheticProfile) -> np.ndarray:
    shape = np.ones(road.n_cells)
    for h in profile.hotspots:
        d = road.distances_from(h.cell)
        shape += h.multiplier * np.exp(-d / h.radius)
    return shape


def rate_matrix(road: RoadGraph, profile: SyntheticProfile, slice_idx: int) -> np.ndarray:
    shape = spatial_profile(road, profile)
    origin = profile.base_rate * shape * profile.tod_curve[slice_idx % len(profile.tod_curve)]
    n = road.n_cells
    dist = np.vstack([road.distances_from(i) for i in range(n)])
    attract = shape[None, :] * np.exp(-dist / profile.dest_decay)
    np.fill_diagonal(attract, 0.0)
    norm = attract.sum(axis=1, keepdims=True)
    norm[norm == 0] = 1.0
    return origin[:, None] * attract / norm


def synth_demand(rates: np.ndarray, seed: int, slice_idx: int) -> tuple[RequestGraph, list[RideRequest]]:
    """Poisson-sample one slice of requests from a rate matrix.

    Returns the rate matrix as the (exact-in-expectation) prediction and the
    sampled requests ordered by (origin, dest); detour thresholds are drawn
    uniformly from [1, 2].
    """
    rates = np.asarray(rates, dtype=float)
    if (rates < 0).any():
        raise ValueError("rates must be nonnegative")
    graph = RequestGraph(rates, slice_idx)
    rng = np.random.default_rng([seed, slice_idx])
    counts = rng.poisson(graph.toarray())
    origins, dests = np.nonzero(counts)
    reps = counts[origins, dests]
    origins = np.repeat(origins, reps)
    dests = np.repeat(dests, reps)
    t_ds = rng.uniform(1.0, 2.0, size=origins.size)
    orders = [RideRequest(int(o), int(d), float(t)) for o, d, t in zip(origins, dests, t_ds)]
    return graph, orders


@dataclass
class TripReplay:
    """Actual requests per slice taken from binned trip records."""

    trips: list[TripRecord]
    start: datetime
    slice_minutes: int = SLICE_MINUTES
    _by_slice: dict[int, list[TripRecord]] = field(init=False, repr=False)

    def __post_init__(self):
        self._by_slice = {}
        for t in sorted(self.trips, key=lambda t: (t.pickup_time, t.pickup_cell, t.dropoff_cell)):
            delta = (t.pickup_time - self.start).total_seconds() / 60
            if delta < 0:
                continue
            self._by_slice.setdefault(int(delta // self.slice_minutes), []).append(t)

    def slice_start(self, s: int) -> datetime:
        return self.start + timedelta(minutes=s * self.slice_minutes)

    def history_before(self, s: int) -> list[TripRecord]:
        cut = self.slice_start(s)
        return [t for t in self.trips if t.pickup_time < cut]

    def requests(self, s: int, seed: int) -> list[RideRequest]:
        rng = np.random.default_rng([seed, s, 1])
        out = []
        # one request per trip record; group size does not occupy extra seats
        for t in self._by_slice.get(s, []):
            out.append(RideRequest(t.pickup_cell, t.dropoff_cell, float(rng.uniform(1.0, 2.0))))
        return out
