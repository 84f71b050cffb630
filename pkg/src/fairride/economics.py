"""Trip fares, pooled-ride revenue and driver utility.

Money is kept as :class:`~decimal.Decimal` rounded to four fractional digits so
that ledgers can be replayed from the event log bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Sequence

MONEY_QUANTUM = Decimal("0.0001")
POOLED_DISCOUNT = Decimal("0.8")


def money(x) -> Decimal:
    if not isinstance(x, Decimal):
        x = Decimal(str(x))
    return x.quantize(MONEY_QUANTUM, rounding=ROUND_HALF_EVEN)


@dataclass(frozen=True)
class FareParams:
    base_fare: Decimal = Decimal("2.55")
    min_fare: Decimal = Decimal("7")
    per_mile: Decimal = Decimal("1.75")
    per_minute: Decimal = Decimal("0.35")
    cost_per_mile: Decimal = Decimal("0.13")

    def __post_init__(self):
        for name in ("base_fare", "min_fare", "per_mile", "per_minute", "cost_per_mile"):
            value = Decimal(str(getattr(self, name)))
            if value < 0:
                raise ValueError(f"{name} must be nonnegative")
            object.__setattr__(self, name, value)


def trip_fare(p: FareParams, miles, minutes) -> Decimal:
    miles, minutes = Decimal(str(miles)), Decimal(str(minutes))
    if miles < 0 or minutes < 0:
        raise ValueError("distance and duration must be nonnegative")
    return money(max(p.min_fare, p.base_fare + miles * p.per_mile + minutes * p.per_minute))


def ride_revenue(fares: Sequence[Decimal]) -> Decimal:
    """Single riders pay their fare; pooled riders each get 20% off."""
    if not fares:
        raise ValueError("a ride needs at least one fare")
    if len(fares) > 1:
        return money(POOLED_DISCOUNT * sum(Decimal(str(f)) for f in fares))
    return money(fares[0])


@dataclass(frozen=True)
class RideRecord:
    """One ride of a driver.

    A ride with no fares is a deadhead leg (cruising, repositioning or
    relocation) and contributes only its distance cost.
    """

    fares: tuple[Decimal, ...]
    miles: Decimal

    @property
    def n_orders(self) -> int:
        return len(self.fares)

    @property
    def revenue(self) -> Decimal:
        return ride_revenue(self.fares) if self.fares else Decimal("0.0000")


@dataclass
class DriverLedger:
    rides: list[RideRecord] = field(default_factory=list)
    cumulative_utility: Decimal = Decimal("0.0000")
    active_hours: float = 0.0

    @property
    def n_rides(self) -> int:
        return sum(1 for r in self.rides if r.fares)

    def record(self, ride: RideRecord, cost_per_mile: Decimal):
        self.rides.append(ride)
        self.cumulative_utility = money(self.cumulative_utility + ride.revenue - money(ride.miles * cost_per_mile))


def driver_utility(ledger: DriverLedger, cost_per_mile) -> Decimal:
    c = Decimal(str(cost_per_mile))
    total = Decimal("0.0000")
    for r in ledger.rides:
        total = money(total + r.revenue - money(r.miles * c))
    return total


def utility_per_hour(ledger: DriverLedger) -> float:
    if ledger.active_hours <= 0:
        return 0.0
    return float(ledger.cumulative_utility) / ledger.active_hours
