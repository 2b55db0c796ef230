# apps/household/validators.py
from typing import List

from django.core.exceptions import ValidationError

from .entities import Scenario


def _window_ok(window, slot_count) -> bool:
    start, end = window
    return 1 <= start <= end <= slot_count


def scenario_violations(scenario: Scenario) -> List[str]:
    """Devuelve la lista completa de invariantes violados (vacía si el escenario es válido)."""
    errors: List[str] = []
    grid = scenario.grid
    n = grid.slot_count

    # ---- rejilla ----
    if n < 1:
        errors.append(f"grid.slot_count debe ser ≥ 1 (vale {n}).")
    if grid.slot_duration <= 0:
        errors.append(f"grid.slot_duration debe ser > 0 (vale {grid.slot_duration}).")

    # ---- inflexibles ----
    for a in scenario.inflexible:
        if a.rated_power < 0:
            errors.append(f"inflexible '{a.name}': rated_power negativo ({a.rated_power}).")
        if not a.windows:
            errors.append(f"inflexible '{a.name}': necesita al menos una ventana.")
        for w in a.windows:
            if not _window_ok(w, n):
                errors.append(f"inflexible '{a.name}': ventana {list(w)} fuera de 1..{n}.")
        ordered = sorted(a.windows)
        for prev, nxt in zip(ordered, ordered[1:]):
            if nxt[0] <= prev[1]:
                errors.append(f"inflexible '{a.name}': ventanas solapadas {list(prev)} y {list(nxt)}.")

    # ---- desplazables ----
    for b in scenario.time_flexible:
        if b.rated_power < 0:
            errors.append(f"time_flexible '{b.name}': rated_power negativo ({b.rated_power}).")
        if not _window_ok(b.window, n):
            errors.append(f"time_flexible '{b.name}': ventana {list(b.window)} fuera de 1..{n}.")
        if b.duration < 1:
            errors.append(f"time_flexible '{b.name}': duration debe ser ≥ 1.")
        if b.window[0] + b.duration - 1 > b.window[1]:
            errors.append(f"time_flexible '{b.name}': no cabe duration={b.duration} en la ventana {list(b.window)}.")
        elif not b.window[0] <= b.requested_start <= b.latest_start:
            errors.append(
                f"time_flexible '{b.name}': requested_start={b.requested_start} fuera de "
                f"[{b.window[0]}, {b.latest_start}]."
            )
        if b.delay_exponent < 1:
            errors.append(f"time_flexible '{b.name}': delay_exponent debe ser ≥ 1.")
        if b.discomfort_weight < 0:
            errors.append(f"time_flexible '{b.name}': discomfort_weight negativo.")

    # ---- regulables ----
    for c in scenario.power_flexible:
        if not 0 <= c.min_power <= c.nominal_power <= c.max_power:
            errors.append(
                f"power_flexible '{c.name}': se requiere 0 ≤ min_power ≤ nominal_power ≤ max_power "
                f"(min={c.min_power}, nominal={c.nominal_power}, max={c.max_power})."
            )
        if not _window_ok(c.window, n):
            errors.append(f"power_flexible '{c.name}': ventana {list(c.window)} fuera de 1..{n}.")
        if c.discomfort_weight < 0:
            errors.append(f"power_flexible '{c.name}': discomfort_weight negativo.")

    # ---- batería ----
    bat = scenario.battery
    if not 0 < bat.leakage_per_slot <= 1:
        errors.append(f"battery: leakage por slot debe estar en (0, 1] (vale {bat.leakage_per_slot}).")
    if bat.max_rate <= 0:
        errors.append(f"battery: max_rate debe ser > 0 (vale {bat.max_rate}).")
    if not 0 <= bat.capacity_min <= bat.initial_energy <= bat.capacity_max:
        errors.append(
            "battery: se requiere 0 ≤ capacity_min ≤ initial_energy ≤ capacity_max "
            f"(min={bat.capacity_min}, inicial={bat.initial_energy}, max={bat.capacity_max})."
        )

    # ---- tarifa y series ----
    prices = scenario.tariff.market_price
    if len(prices) != n:
        errors.append(f"series: price tiene {len(prices)} valores, se esperaban {n}.")
    if any(p < 0 for p in prices):
        errors.append("tariff: hay precios de mercado negativos.")
    if scenario.tariff.feed_in_rate < 0:
        errors.append("tariff: feed_in_rate negativo.")
    if prices and scenario.tariff.feed_in_rate > min(prices):
        errors.append(
            f"tariff: feed_in_rate={scenario.tariff.feed_in_rate} supera el precio mínimo "
            f"de mercado ({min(prices)}); la FIT debe ser menor que el precio."
        )
    if len(scenario.renewable_true) != n:
        errors.append(f"series: solar tiene {len(scenario.renewable_true)} valores, se esperaban {n}.")
    if any(p < 0 for p in scenario.renewable_true):
        errors.append("series: hay valores solares negativos.")
    if scenario.load_true is not None:
        if len(scenario.load_true) != n:
            errors.append(f"series: load tiene {len(scenario.load_true)} valores, se esperaban {n}.")
        if any(p < 0 for p in scenario.load_true):
            errors.append("series: hay cargas negativas.")

    return errors


def validate_scenario(scenario: Scenario) -> Scenario:
    errors = scenario_violations(scenario)
    if errors:
        raise ValidationError(errors)
    return scenario
