"""Income inequality metrics and the fairness interventions.

Two interventions act on the fleet: drivers are served in ascending order of
utility per hour (priority scheduling), and the bottom earners are moved to the
best cell of their 3x3 neighbourhood before receiving a route (relocation).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .demand import RequestGraph
from .grid import GridSpec

EPS = 1e-6


@dataclass(frozen=True)
class IncomeSnapshot:
    rates: tuple[tuple[int, float], ...]
    taken_at: int = 0

    @classmethod
    def from_mapping(cls, rates: Mapping[int, float], taken_at: int = 0) -> IncomeSnapshot:
        return cls(tuple(sorted((int(k), float(v)) for k, v in rates.items())), taken_at)

    def as_dict(self) -> dict[int, float]:
        return dict(self.rates)


@dataclass(frozen=True)
class FairnessWeights:
    weights: tuple[tuple[int, float], ...]

    def __post_init__(self):
        if any(w <= 0 for _, w in self.weights):
            raise ValueError("fairness weights must be positive")

    @property
    def normalization(self) -> float:
        return sum(w for _, w in self.weights)

    def target_shares(self) -> dict[int, float]:
        total = self.normalization
        return {d: w / total for d, w in self.weights}


def _clamped(incomes: Iterable[float]) -> np.ndarray:
    x = np.asarray(list(incomes), dtype=float)
    if x.size == 0:
        raise ValueError("incomes must be nonempty")
    return np.clip(x, 0.0, None)


def lorenz(incomes: Iterable[float]) -> list[tuple[float, float]]:
    x = np.sort(_clamped(incomes))
    n = x.size
    pop = np.arange(0, n + 1) / n
    total = x.sum()
    if total <= 0:
        share = pop.copy()
    else:
        share = np.concatenate([[0.0], np.cumsum(x) / total])
        share[-1] = 1.0
    return list(zip(pop.tolist(), share.tolist()))


def gini(incomes: Iterable[float]) -> float:
    """Mean absolute difference over twice the mean; 0 when every income is 0."""
    x = np.sort(_clamped(incomes))
    n = x.size
    mean = x.mean()
    if mean <= 0:
        return 0.0
    # sum_i sum_j |x_i - x_j| = 2 * sum_i (2i - n + 1) x_(i) for sorted x, i from 0
    idx = np.arange(n)
    mad_sum = 2.0 * np.sum((2 * idx - n + 1) * x)
    return float(mad_sum / (2.0 * n * n * mean))


def hour_weights(history: Sequence[tuple[int, int, float]], hour: int, drivers: Iterable[int] | None = None, floor: float = EPS) -> FairnessWeights:
    """Demand weights from the fleet's mean utility per hour in ``hour``.

    ``history`` holds ``(driver, hour, utility_per_hour)`` records.  Every
    driver working in ``hour`` gets that hour's fleet mean, floored at
    ``floor``; with no history for the hour all weights are 1.
    """
    in_hour = [(d, r) for d, h, r in history if h == hour]
    members = sorted(set(drivers) if drivers is not None else {d for d, _ in in_hour})
    if not in_hour:
        return FairnessWeights(tuple((d, 1.0) for d in members))
    w = max(float(np.mean([r for _, r in in_hour])), floor)
    return FairnessWeights(tuple((d, w) for d in members))


def fair_objective(utilities: Mapping[int, float] | Sequence[float], weights: FairnessWeights, floor: float = EPS) -> float:
    wmap = dict(weights.weights)
    if isinstance(utilities, Mapping):
        items = [(wmap[d], u) for d, u in utilities.items()]
    else:
        items = [(w, u) for (_, w), u in zip(weights.weights, utilities)]
    return float(sum(w * np.log(max(float(u), floor)) for w, u in items))


def priority_order(snapshot: IncomeSnapshot) -> list[int]:
    return [d for d, _ in sorted(snapshot.rates, key=lambda dr: (dr[1], dr[0]))]


def relocation_candidates(snapshot: IncomeSnapshot, fraction: float) -> set[int]:
    """Drivers in the bottom ``fraction`` of the earnings ranking."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("relocate fraction must lie in [0, 1]")
    order = priority_order(snapshot)
    n = int(np.floor(fraction * len(order) + 1e-9))
    return set(order[:n])


def window_cells(spec: GridSpec, cell: int) -> list[int]:
    r, c = spec.coords(cell)
    out = []
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            rr, cc = r + dr, c + dc
            if 0 <= rr < spec.rows and 0 <= cc < spec.cols:
                out.append(spec.cell(rr, cc))
    return sorted(out)


def future_reach(candidate: int, pred_now: RequestGraph, pred_next: RequestGraph) -> float:
    """Next-slice outgoing demand at the destinations of ``candidate``'s requests."""
    row = pred_now.row(candidate)
    dests = np.flatnonzero(row)
    if dests.size == 0:
        return 0.0
    return float(pred_next.out_totals()[dests].sum())


def relocate(
    driver_id: int,
    cell: int,
    snapshot: IncomeSnapshot,
    spec: GridSpec,
    pred_now: RequestGraph,
    pred_next: RequestGraph,
    relocate_fraction: float = 0.7,
    future_threshold: float = 1.0,
) -> int | None:
    """Target cell for a low earner, or None to stay put.

    Window cells are ranked by predicted outgoing requests (ties to the lower
    cell id); the first whose requests lead to cells with at least
    ``future_threshold`` expected requests in the next slice wins.
    """
    if driver_id not in relocation_candidates(snapshot, relocate_fraction):
        return None
    totals = pred_now.out_totals()
    ranked = sorted(window_cells(spec, cell), key=lambda c: (-totals[c], c))
    for cand in ranked:
        if totals[cand] <= 0:
            break
        if future_reach(cand, pred_now, pred_next) >= future_threshold:
            return cand
    return None


def improvement(p: float, b: float) -> float:
    if b == 0:
        raise ZeroDivisionError("baseline value must be nonzero")
    return (p - b) / b * 100.0
