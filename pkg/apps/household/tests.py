# apps/household/tests.py
import dataclasses

import numpy as np
import pytest
from django.conf import settings
from django.core.exceptions import ValidationError
from hypothesis import given, settings as hsettings, strategies as st

from apps.common.exceptions import ConstraintViolationError, SlotRangeError
from apps.household.entities import (
    Battery,
    InflexibleAppliance,
    PowerFlexibleAppliance,
    Scenario,
    Tariff,
    TimeFlexibleAppliance,
    TimeGrid,
)
from apps.household.loader import describe_scenario, load_scenario, parse_scenario, read_series
from apps.household.power import (
    advance_energy,
    flexible_mask,
    grid_exchange,
    inflexible_load,
    inflexible_profile,
    step_battery,
    time_flexible_load,
    total_consumption,
)
from apps.household.validators import scenario_violations

RHO = 0.9 ** (1 / 24)


def _battery(**overrides):
    values = dict(leakage_per_slot=RHO, max_rate=3.0, capacity_min=3.0, capacity_max=10.0, initial_energy=4.0)
    values.update(overrides)
    return Battery(**values)


@st.composite
def _windows(draw, n, min_length=1):
    start = draw(st.integers(1, n - min_length + 1))
    end = draw(st.integers(start + min_length - 1, n))
    return start, end


@st.composite
def scenarios(draw, n=12) -> Scenario:
    power = st.floats(0, 2, allow_nan=False)
    inflexible = [
        InflexibleAppliance(f"a{i}", draw(power), [draw(_windows(n))])
        for i in range(draw(st.integers(0, 2)))
    ]
    time_flexible = []
    for i in range(draw(st.integers(0, 2))):
        duration = draw(st.integers(1, 3))
        a, b = draw(_windows(n, min_length=duration))
        time_flexible.append(TimeFlexibleAppliance(f"b{i}", draw(power), (a, b), duration, a, 0.01, 2))
    power_flexible = []
    for i in range(draw(st.integers(0, 2))):
        lo = draw(st.floats(0, 1))
        hi = lo + draw(st.floats(0, 1))
        power_flexible.append(PowerFlexibleAppliance(f"c{i}", lo, hi, draw(_windows(n)), 1.0, hi))
    return Scenario(
        grid=TimeGrid(slot_count=n),
        inflexible=inflexible,
        time_flexible=time_flexible,
        power_flexible=power_flexible,
        battery=_battery(),
        tariff=Tariff([5.0] * n, 1.0),
        renewable_true=[0.0] * n,
    )


# ====================================================
# Escenario incluido
# ====================================================
def test_bundled_scenario_is_valid(reference_home):
    assert scenario_violations(reference_home) == []
    assert reference_home.grid.slot_count == 24
    assert (len(reference_home.inflexible), len(reference_home.time_flexible), len(reference_home.power_flexible)) == (3, 1, 2)
    assert reference_home.battery.leakage_per_slot == pytest.approx(RHO)
    assert reference_home.tariff.feed_in_rate == 2.5


def test_bundled_load_matches_appliances(reference_home):
    np.testing.assert_allclose(reference_home.load_series(), inflexible_profile(reference_home))


def test_describe_scenario_reports_derived_leakage(reference_home):
    summary = describe_scenario(reference_home)
    assert summary["battery"]["daily_retention"] == pytest.approx(0.9)
    assert summary["appliances"] == {"inflexible": 3, "time_flexible": 1, "power_flexible": 2}


def test_daily_retention_on_half_hour_grid(reference_home):
    rho = Battery.leakage_from_retention(0.9, 0.5)
    assert _battery(leakage_per_slot=rho).daily_retention(0.5) == pytest.approx(0.9)
    half_hour = dataclasses.replace(
        reference_home,
        grid=TimeGrid(24, 0.5, "08:00"),
        battery=dataclasses.replace(reference_home.battery, leakage_per_slot=rho),
    )
    assert describe_scenario(half_hour)["battery"]["daily_retention"] == pytest.approx(0.9)


@pytest.mark.parametrize("slot", [0, -1, 25])
def test_tariff_price_rejects_slots_outside_day(reference_home, slot):
    with pytest.raises(SlotRangeError):
        reference_home.tariff.price(slot)
    assert reference_home.tariff.price(1) == reference_home.tariff.market_price[0]


def test_clock_labels(reference_home):
    assert reference_home.grid.clock_label(1) == "08:00"
    assert reference_home.grid.clock_label(24) == "07:00"


def test_slot_index_roundtrip():
    grid = TimeGrid(slot_count=5)
    assert [grid.slot(grid.index(s)) for s in grid.slots()] == [1, 2, 3, 4, 5]
    with pytest.raises(SlotRangeError):
        grid.index(0)


# ====================================================
# Cargas
# ====================================================
def test_inflexible_load_reference(reference_home):
    assert inflexible_load(reference_home, 1) == pytest.approx(1.4)
    assert inflexible_load(reference_home, 2) == pytest.approx(0.2)


def test_inflexible_load_empty_and_out_of_range(reference_home):
    empty = dataclasses.replace(reference_home, inflexible=())
    assert inflexible_load(empty, 5) == 0
    with pytest.raises(SlotRangeError):
        inflexible_load(reference_home, 25)


def test_time_flexible_load(reference_home):
    b1 = reference_home.time_flexible[0]
    assert time_flexible_load([b1], [11], 12) == pytest.approx(0.7)
    assert time_flexible_load([b1], [11], 13) == 0
    other = TimeFlexibleAppliance("b2", 0.5, (1, 24), 3, 10, 0.0, 1)
    assert time_flexible_load([b1, other], [11, 10], 12) == pytest.approx(1.2)


def test_time_flexible_start_outside_window(reference_home):
    with pytest.raises(ConstraintViolationError):
        time_flexible_load(reference_home.time_flexible, [23], 12)


def test_admissible_starts_after_requested(reference_home):
    b1 = reference_home.time_flexible[0]
    assert b1.admissible_starts(1) == (11, 22)
    assert b1.admissible_starts(15) == (15, 22)
    with pytest.raises(ConstraintViolationError):
        b1.admissible_starts(23)


def test_delay_penalty():
    b = TimeFlexibleAppliance("b", 0.7, (11, 23), 2, 11, 0.001, 3)
    assert b.delay_penalty(14) == pytest.approx(0.027)
    with pytest.raises(ConstraintViolationError):
        b.delay_penalty(10)


def test_total_consumption_reference_slot2(reference_home):
    powers = np.zeros((reference_home.flexible_count, 24))
    assert total_consumption(reference_home, reference_home.default_starts, powers, 2) == pytest.approx(0.2)


def test_total_consumption_sum_of_parts():
    scenario = Scenario(
        grid=TimeGrid(slot_count=3),
        inflexible=[InflexibleAppliance("a", 1.4, [(1, 3)])],
        time_flexible=[TimeFlexibleAppliance("b", 0.7, (1, 3), 1, 2, 0.0, 1)],
        power_flexible=[PowerFlexibleAppliance("c", 0.0, 2.0, (1, 3), 1.0, 1.0)],
        battery=_battery(),
        tariff=Tariff([5.0] * 3, 1.0),
        renewable_true=[0.0] * 3,
    )
    assert total_consumption(scenario, [2], [[1.0, 1.0, 1.0]], 2) == pytest.approx(3.1)


@hsettings(max_examples=300, deadline=None)
@given(data=st.data(), scenario=scenarios())
def test_total_consumption_matches_bruteforce(data, scenario):
    n = scenario.grid.slot_count
    starts = [data.draw(st.integers(b.earliest_start, b.latest_start)) for b in scenario.time_flexible]
    powers = np.array(
        data.draw(st.lists(st.lists(st.floats(0, 2), min_size=n, max_size=n),
                           min_size=scenario.flexible_count, max_size=scenario.flexible_count))
    ).reshape(scenario.flexible_count, n)
    slot = data.draw(st.integers(1, n))

    expected = 0.0
    for a in scenario.inflexible:
        for lo, hi in a.windows:
            if lo <= slot <= hi:
                expected += a.rated_power
    for b, t in zip(scenario.time_flexible, starts):
        if t <= slot < t + b.duration:
            expected += b.rated_power
    for k, c in enumerate(scenario.power_flexible):
        if c.window[0] <= slot <= c.window[1]:
            expected += powers[k, slot - 1]
    assert total_consumption(scenario, starts, powers, slot) == pytest.approx(expected)


@hsettings(max_examples=200, deadline=None)
@given(scenario=scenarios())
def test_indicator_consistency(scenario):
    slots = list(scenario.grid.slots())
    mask = flexible_mask(scenario, slots)
    for k, c in enumerate(scenario.power_flexible):
        for s in slots:
            assert mask[k, s - 1] == (1.0 if c.window[0] <= s <= c.window[1] else 0.0)
    for a in scenario.inflexible:
        single = dataclasses.replace(scenario, inflexible=(a,))
        for s in slots:
            if not a.is_active(s):
                assert inflexible_load(single, s) == 0


# ====================================================
# Red y batería
# ====================================================
@pytest.mark.parametrize(
    "p_con,p_s,p_re,expected",
    [(3.1, -1.0, 0.5, 1.6), (1.0, 0.0, 2.0, -1.0), (0.0, 0.0, 0.0, 0.0)],
)
def test_grid_exchange(p_con, p_s, p_re, expected):
    assert grid_exchange(p_con, p_s, p_re) == pytest.approx(expected)


def test_step_battery_examples():
    assert step_battery(4.0, 1.0, _battery(leakage_per_slot=1.0), 1.0) == pytest.approx(5.0)
    assert step_battery(4.0, 1.0, _battery(), 1.0) == pytest.approx(4.98249, abs=1e-4)
    energy = 4.0
    for _ in range(24):
        energy = step_battery(energy, 0.0, _battery(), 1.0)
    assert energy == pytest.approx(3.6, abs=1e-6)


def test_step_battery_rate_bound():
    with pytest.raises(ConstraintViolationError):
        step_battery(4.0, 3.5, _battery(), 1.0)


@hsettings(max_examples=200, deadline=None)
@given(
    e1=st.floats(0, 10), e2=st.floats(0, 10),
    p1=st.floats(-3, 3), p2=st.floats(-3, 3),
    alpha=st.floats(0, 1),
)
def test_step_battery_is_affine(e1, e2, p1, p2, alpha):
    beta = 1 - alpha
    bat = _battery()
    combined = step_battery(alpha * e1 + beta * e2, alpha * p1 + beta * p2, bat, 1.0)
    separate = alpha * step_battery(e1, p1, bat, 1.0) + beta * step_battery(e2, p2, bat, 1.0)
    assert combined == pytest.approx(separate, abs=1e-9)


def test_advance_energy_skips_rate_check():
    assert advance_energy(4.0, 10.0, 1.0, 0.5) == pytest.approx(9.0)


# ====================================================
# Validación y carga de archivos
# ====================================================
def test_validation_reports_power_ordering(reference_home):
    c1 = dataclasses.replace(reference_home.power_flexible[0], min_power=0.9)
    broken = dataclasses.replace(reference_home, power_flexible=(c1, reference_home.power_flexible[1]))
    errors = scenario_violations(broken)
    assert any("'c1'" in e for e in errors)


def test_validation_reports_feed_in_above_price(reference_home):
    broken = dataclasses.replace(reference_home, tariff=Tariff(reference_home.tariff.market_price, 3.5))
    assert any("feed_in_rate" in e for e in scenario_violations(broken))


def test_validation_collects_every_violation(reference_home):
    bad_battery = _battery(initial_energy=12.0)
    broken = dataclasses.replace(
        reference_home, battery=bad_battery, tariff=Tariff(reference_home.tariff.market_price, 3.5)
    )
    assert len(scenario_violations(broken)) >= 2


def test_missing_feed_in_rate_names_field(reference_home, tmp_path):
    data = {
        "grid": {"slot_count": 24},
        "battery": {"leakage": 0.9, "max_rate": 3, "capacity_min": 3, "capacity_max": 10, "initial_energy": 4},
        "tariff": {},
    }
    series = read_series(settings.BUNDLED_SCENARIO.parent / "reference_home_series.csv")
    with pytest.raises(ValidationError) as excinfo:
        parse_scenario(data, series)
    assert any("tariff.feed_in_rate" in m for m in excinfo.value.messages)


def test_missing_series_file_names_path(tmp_path):
    path = tmp_path / "home.scenario"
    path.write_text("name: x\nseries: missing.csv\n", encoding="utf-8")
    with pytest.raises(ValidationError) as excinfo:
        load_scenario(path)
    assert "missing.csv" in excinfo.value.messages[0]
