"""World configuration: YAML loading, validation, overrides and hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any

import yaml

from .economics import FareParams
from .grid import GridSpec

POLICIES = ("fairness_on", "fcfs_dp", "greedy")


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class HotspotConfig:
    cell: int
    multiplier: float
    radius: float = 2.0


@dataclass(frozen=True)
class DemandConfig:
    source: str = "synthetic"
    # synthetic
    base_rate: float = 0.02
    hotspots: tuple[HotspotConfig, ...] = ()
    tod_curve: tuple[float, ...] = (1.0,)
    dest_decay: float = 4.0
    # csv replay
    trips_csv: str | None = None
    bounds: tuple[float, float, float, float] | None = None  # min_lat, min_lon, max_lat, max_lon
    start: str | None = None
    predictor: str = "historical"
    # scripted fixtures
    requests_file: str | None = None
    orders: tuple[tuple[int, int, int, float], ...] = ()  # slice, origin, dest, t_d


@dataclass(frozen=True)
class WorldConfig:
    grid: GridSpec = GridSpec(16, 16)
    fleet_size: int = 20
    capacity: int = 3
    relocate_fraction: float = 0.7
    minutes_per_cell: int = 3
    slice_minutes: int = 15
    fare: FareParams = FareParams()
    policy: str = "fairness_on"
    seed: int = 0
    duration_slices: int = 32
    route_detour: float = 1.5
    expiry_slices: int = 4
    future_threshold: float = 1.0
    diagonal_weight: int = 1
    road_file: str | None = None
    initial_cells: tuple[int, ...] | None = None
    demand: DemandConfig = field(default_factory=DemandConfig)

    def __post_init__(self):
        self.validate()

    @property
    def ticks_per_slice(self) -> int:
        return self.slice_minutes // self.minutes_per_cell

    def validate(self):
        if self.policy not in POLICIES:
            raise ConfigError("policy", f"must be one of {', '.join(POLICIES)}, got {self.policy!r}")
        if self.fleet_size < 0:
            raise ConfigError("fleet_size", "must be nonnegative")
        if self.capacity < 1:
            raise ConfigError("capacity", "must be positive")
        if not 0 <= self.relocate_fraction <= 1:
            raise ConfigError("relocate_fraction", "must lie in [0, 1]")
        if self.minutes_per_cell <= 0 or self.slice_minutes <= 0:
            raise ConfigError("minutes_per_cell", "minutes must be positive")
        if self.slice_minutes % self.minutes_per_cell:
            raise ConfigError("minutes_per_cell", f"must divide slice_minutes={self.slice_minutes}")
        if self.duration_slices < 0:
            raise ConfigError("duration_slices", "must be nonnegative")
        if self.route_detour < 1:
            raise ConfigError("route_detour", "must be at least 1")
        if self.expiry_slices < 1:
            raise ConfigError("expiry_slices", "must be positive")
        if self.demand.source not in ("synthetic", "csv", "scripted"):
            raise ConfigError("demand.source", f"unknown source {self.demand.source!r}")
        if self.demand.source == "csv" and (not self.demand.trips_csv or not self.demand.bounds or not self.demand.start):
            raise ConfigError("demand", "csv source needs trips_csv, bounds and start")
        if self.demand.predictor not in ("historical", "oracle"):
            raise ConfigError("demand.predictor", f"unknown predictor {self.demand.predictor!r}")
        if self.initial_cells is not None and len(self.initial_cells) != self.fleet_size:
            raise ConfigError("initial_cells", f"needs {self.fleet_size} entries, got {len(self.initial_cells)}")

    # ------------------------------------------------------------------ serialisation

    def to_dict(self) -> dict[str, Any]:
        def conv(x):
            if dataclasses.is_dataclass(x):
                return {f.name: conv(getattr(x, f.name)) for f in dataclasses.fields(x)}
            if isinstance(x, Decimal):
                return str(x)
            if isinstance(x, (list, tuple)):
                return [conv(v) for v in x]
            return x

        return conv(self)

    def hash(self) -> str:
        return _digest(self.to_dict())

    def demand_hash(self) -> str:
        d = self.to_dict()
        keys = ("grid", "demand", "seed", "duration_slices", "fleet_size", "initial_cells", "road_file", "diagonal_weight")
        return _digest({k: d[k] for k in keys})


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def _build(cls, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(prefix or "config", "expected a mapping")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ConfigError(f"{prefix}{sorted(unknown)[0]}", "unknown field")
    kwargs = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        try:
            if key == "grid":
                value = _build(GridSpec, value, name + ".")
            elif key == "fare":
                value = _build(FareParams, {k: Decimal(str(v)) for k, v in value.items()}, name + ".")
            elif key == "demand":
                value = _build(DemandConfig, value, name + ".")
            elif key == "hotspots":
                value = tuple(_build(HotspotConfig, h, name + ".") for h in value)
            elif key == "orders":
                value = tuple((int(a), int(b), int(c), float(d)) for a, b, c, d in value)
            elif key in ("tod_curve", "bounds"):
                value = tuple(float(v) for v in value)
            elif key == "initial_cells" and value is not None:
                value = tuple(int(v) for v in value)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(name, str(exc)) from exc
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        if prefix:
            raise ConfigError(prefix + exc.field, str(exc).split(": ", 1)[-1]) from exc
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(prefix.rstrip(".") or "config", str(exc)) from exc


def config_from_dict(data: dict) -> WorldConfig:
    return _build(WorldConfig, data, "")


def apply_overrides(data: dict, overrides: dict[str, Any]) -> dict:
    """Set dotted keys (``demand.base_rate``) on a nested config mapping."""
    out = json.loads(json.dumps(data, default=str))
    for dotted, value in overrides.items():
        node = out
        parts = dotted.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return out


def load_config(path: str | Path, overrides: dict[str, Any] | None = None) -> tuple[WorldConfig, dict]:
    """Parse a YAML config; relative file references resolve against its folder.

    Returns the config and the final raw mapping (after overrides).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a mapping")
    raw = apply_overrides(raw, overrides or {})
    base = path.parent
    if raw.get("road_file"):
        raw["road_file"] = str((base / raw["road_file"]).resolve())
    demand = raw.get("demand") or {}
    for key in ("trips_csv", "requests_file"):
        if demand.get(key):
            demand[key] = str((base / demand[key]).resolve())
    return config_from_dict(raw), raw
