from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fairride.economics import (
    DriverLedger,
    FareParams,
    RideRecord,
    driver_utility,
    money,
    ride_revenue,
    trip_fare,
    utility_per_hour,
)

P = FareParams()


def test_default_fare_parameters():
    assert (P.base_fare, P.min_fare, P.per_mile, P.per_minute, P.cost_per_mile) == (
        Decimal("2.55"), Decimal("7"), Decimal("1.75"), Decimal("0.35"), Decimal("0.13"))


def test_minimum_fare_applies_to_short_trips():
    assert trip_fare(P, 0, 0) == Decimal("7.0000")
    assert trip_fare(P, 1, 3) == Decimal("7.0000")  # 2.55 + 1.75 + 1.05 = 5.35


def test_metered_fare():
    # 2.55 + 4.96 * 1.75 + 12 * 0.35
    assert trip_fare(P, Decimal("4.96"), 12) == money(Decimal("2.55") + Decimal("4.96") * Decimal("1.75") + 12 * Decimal("0.35"))


def test_negative_inputs_rejected():
    with pytest.raises(ValueError):
        trip_fare(P, -1, 0)
    with pytest.raises(ValueError):
        FareParams(base_fare=Decimal("-1"))


def test_pooled_discount():
    assert ride_revenue([Decimal("10")]) == Decimal("10.0000")
    assert ride_revenue([Decimal("10"), Decimal("20")]) == Decimal("24.0000")
    with pytest.raises(ValueError):
        ride_revenue([])


def test_utility_is_revenue_minus_distance_cost():
    led = DriverLedger()
    led.record(RideRecord((Decimal("10"),), Decimal("5")), P.cost_per_mile)
    led.record(RideRecord((), Decimal("2")), P.cost_per_mile)
    assert led.cumulative_utility == Decimal("10") - Decimal("0.65") - Decimal("0.26")
    assert driver_utility(led, P.cost_per_mile) == led.cumulative_utility
    assert led.n_rides == 1


def test_utility_per_hour():
    led = DriverLedger(cumulative_utility=Decimal("30"), active_hours=2.0)
    assert utility_per_hour(led) == 15.0
    assert utility_per_hour(DriverLedger()) == 0.0


@given(st.lists(st.tuples(st.lists(st.decimals("7", "80", places=2), max_size=3), st.decimals("0", "30", places=2)), max_size=12))
def test_incremental_and_batch_utility_agree(rides):
    led = DriverLedger()
    for fares, miles in rides:
        led.record(RideRecord(tuple(fares), miles), P.cost_per_mile)
    assert led.cumulative_utility == driver_utility(led, P.cost_per_mile)


@given(st.decimals("0", "100", places=3), st.integers(0, 600))
def test_fare_at_least_minimum_and_monotone(miles, minutes):
    f = trip_fare(P, miles, minutes)
    assert f >= P.min_fare
    assert trip_fare(P, miles + 1, minutes) >= f
    assert trip_fare(P, miles, minutes + 1) >= f


def test_desk_values():
    assert trip_fare(P, Decimal("4.96"), 12) == Decimal("15.4300")
    assert trip_fare(P, 1, 1) == Decimal("7.0000")
    assert ride_revenue([Decimal("10"), Decimal("10")]) == Decimal("16.0000")
    assert ride_revenue([Decimal("7"), Decimal("15.43"), Decimal("7")]) == Decimal("23.5440")
    led = DriverLedger()
    led.record(RideRecord((Decimal("16"),), Decimal("5")), P.cost_per_mile)
    assert led.cumulative_utility == Decimal("15.3500")
    assert driver_utility(DriverLedger(), P.cost_per_mile) == 0


def test_negative_utility_kept():
    led = DriverLedger()
    led.record(RideRecord((), Decimal("40")), P.cost_per_mile)
    assert led.cumulative_utility == Decimal("-5.2000")


def test_identical_drivers_identical_rates():
    rides = [RideRecord((Decimal("12"),), Decimal("3")), RideRecord((), Decimal("1"))]
    a, b = DriverLedger(active_hours=2.0), DriverLedger(active_hours=2.0)
    for r in rides:
        a.record(r, P.cost_per_mile)
        b.record(r, P.cost_per_mile)
    assert utility_per_hour(a) == utility_per_hour(b)
