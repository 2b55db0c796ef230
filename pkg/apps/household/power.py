# apps/household/power.py
"""
Contabilidad de potencia del hogar: cargas por tipo, consumo total,
intercambio con la red y dinámica de la batería.

Funciones puras; no guardan estado.
"""
from typing import Sequence

import numpy as np

from apps.common.exceptions import ConstraintViolationError, ParameterError

from .entities import Battery, Scenario, TimeFlexibleAppliance

_RATE_TOLERANCE = 1e-9


def inflexible_load(scenario: Scenario, slot: int) -> float:
    """Σ_a γ_a·X_a(slot)."""
    scenario.grid.check(slot)
    return float(sum(a.rated_power for a in scenario.inflexible if a.is_active(slot)))


def inflexible_profile(scenario: Scenario) -> np.ndarray:
    return np.array([inflexible_load(scenario, slot) for slot in scenario.grid.slots()])


def time_flexible_load(
    appliances: Sequence[TimeFlexibleAppliance], starts: Sequence[int], slot: int
) -> float:
    """Σ_b γ_b·X_b(slot), con X_b = 1 sii slot ∈ {t_b, …, t_b + T_b − 1}."""
    if len(appliances) != len(starts):
        raise ParameterError(f"Se esperaban {len(appliances)} arranques, llegaron {len(starts)}")
    total = 0.0
    for appliance, start in zip(appliances, starts):
        appliance.check_start(int(start))
        if appliance.is_running(int(start), slot):
            total += appliance.rated_power
    return total


def flexible_mask(scenario: Scenario, slots: Sequence[int]) -> np.ndarray:
    """Indicadores X_c(slot): matriz ℓ × len(slots)."""
    return np.array(
        [[1.0 if c.is_active(s) else 0.0 for s in slots] for c in scenario.power_flexible],
        dtype=float,
    ).reshape(scenario.flexible_count, len(slots))


def total_consumption(scenario: Scenario, starts: Sequence[int], flexible_powers, slot: int) -> float:
    """
    P_con(slot) = inflexible + desplazables + regulables.

    ``flexible_powers`` es una matriz ℓ × slot_count de potencias absolutas;
    fuera de la ventana de cada electrodoméstico se ignora (enmascarado por X_c).
    """
    scenario.grid.check(slot)
    powers = np.asarray(flexible_powers, dtype=float).reshape(scenario.flexible_count, -1)
    if powers.shape[1] != scenario.grid.slot_count:
        raise ParameterError(
            f"flexible_powers debe tener {scenario.grid.slot_count} columnas, tiene {powers.shape[1]}"
        )
    column = powers[:, slot - 1]
    pf = sum(float(p) for c, p in zip(scenario.power_flexible, column) if c.is_active(slot))
    return inflexible_load(scenario, slot) + time_flexible_load(scenario.time_flexible, starts, slot) + pf


def grid_exchange(p_con: float, p_storage: float, p_renewable: float) -> float:
    """P_total = P_con + P_s − P_re (negativo = exportación)."""
    return p_con + p_storage - p_renewable


def step_battery(energy: float, p_storage: float, battery: Battery, dt: float) -> float:
    """E' = ρ·E + P_s·Δt. Las cotas de capacidad se garantizan aguas arriba."""
    if abs(p_storage) > battery.max_rate + _RATE_TOLERANCE:
        raise ConstraintViolationError(
            f"|P_s| = {abs(p_storage):.6g} kW excede S_max = {battery.max_rate:.6g} kW"
        )
    return advance_energy(energy, p_storage, battery.leakage_per_slot, dt)


def advance_energy(energy, p_storage, leakage: float, dt: float):
    """Paso de la ecuación de la batería sin validar la tasa (lo usan los baselines)."""
    return leakage * energy + p_storage * dt


def simulate_energy(energy0: float, battery_powers, leakage: float, dt: float) -> np.ndarray:
    """Trayectoria E(t+1..t+M) para una secuencia de potencias de batería."""
    trajectory = []
    energy = float(energy0)
    for p in np.asarray(battery_powers, dtype=float):
        energy = advance_energy(energy, float(p), leakage, dt)
        trajectory.append(energy)
    return np.array(trajectory, dtype=float)
