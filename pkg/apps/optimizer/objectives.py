# apps/optimizer/objectives.py
"""
Objetivos del problema: costo de energía (con FIT) e insatisfacción.

``controls`` es siempre la matriz de desviaciones (1+ℓ)×M: fila 0 potencia
de batería, filas 1..ℓ desviación de cada regulable respecto a su nominal.
Fuera de la ventana de un regulable la desviación se ignora.
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from apps.common.exceptions import ParameterError
from apps.control.laguerre import reconstruct_controls
from apps.household.power import time_flexible_load


@dataclass(frozen=True)
class ForecastBundle:
    price: np.ndarray
    renewable: np.ndarray
    inflexible_load: np.ndarray
    t_now: int = 1

    def __post_init__(self):
        for name in ("price", "renewable", "inflexible_load"):
            values = np.array(getattr(self, name), dtype=float)
            values.setflags(write=False)
            object.__setattr__(self, name, values)
        if not len(self.price) == len(self.renewable) == len(self.inflexible_load):
            raise ParameterError("Las series del pronóstico deben tener la misma longitud")
        if np.any(self.price < 0) or np.any(self.renewable < 0):
            raise ParameterError("Precios y renovable pronosticados deben ser ≥ 0")

    @property
    def horizon(self) -> int:
        return len(self.price)


@dataclass(frozen=True)
class ObjectiveValues:
    cost: float
    dissatisfaction: float
    time_flexible: float = 0.0
    power_flexible: float = 0.0

    @property
    def pair(self):
        return self.cost, self.dissatisfaction


def _horizon(controls, forecast: ForecastBundle, flexible_count: int) -> np.ndarray:
    controls = np.asarray(controls, dtype=float)
    expected = (1 + flexible_count, forecast.horizon)
    if controls.shape != expected:
        raise ParameterError(f"controls debe tener forma {expected}, tiene {controls.shape}")
    return controls


def activity_mask(scenario, t_now: int, horizon: int) -> np.ndarray:
    """X_c(t+m) como matriz ℓ × M."""
    slots = range(t_now, t_now + horizon)
    return np.array(
        [[1.0 if c.is_active(s) else 0.0 for s in slots] for c in scenario.power_flexible]
    ).reshape(scenario.flexible_count, horizon)


def absolute_flexible(scenario, controls, t_now: int) -> np.ndarray:
    """P_c(t+m) = (P_nor + desviación)·X_c, matriz ℓ × M."""
    controls = np.asarray(controls, dtype=float)
    nominal = np.array([c.nominal_power for c in scenario.power_flexible]).reshape(-1, 1)
    return (nominal + controls[1:]) * activity_mask(scenario, t_now, controls.shape[1])


def net_exchange(scenario, forecast: ForecastBundle, controls, starts: Sequence[int], t_now: int) -> np.ndarray:
    """P_total(t+m) para cada paso del horizonte."""
    controls = _horizon(controls, forecast, scenario.flexible_count)
    shifted = np.array([
        time_flexible_load(scenario.time_flexible, starts, t_now + m) for m in range(forecast.horizon)
    ])
    flexible = absolute_flexible(scenario, controls, t_now).sum(axis=0)
    return forecast.inflexible_load + shifted + flexible + controls[0] - forecast.renewable


def energy_cost(p_total, price, feed_in_rate: float, dt: float) -> float:
    """Σ λ̃·P_total·Δt con λ̃ = precio si se importa, FIT si se exporta."""
    p_total = np.asarray(p_total, dtype=float)
    rate = np.where(p_total > 0, np.asarray(price, dtype=float), feed_in_rate)
    return float(np.sum(rate * p_total) * dt)


def evaluate_cost(scenario, forecast: ForecastBundle, controls, starts, t_now: int) -> float:
    p_total = net_exchange(scenario, forecast, controls, starts, t_now)
    return energy_cost(p_total, forecast.price, scenario.tariff.feed_in_rate, scenario.grid.slot_duration)


def evaluate_dissatisfaction(scenario, controls, starts, t_now: int):
    """(F_tf, F_pf, F_dissat)."""
    controls = np.asarray(controls, dtype=float)
    if controls.shape[0] != 1 + scenario.flexible_count:
        raise ParameterError(f"controls debe tener {1 + scenario.flexible_count} filas")
    f_tf = float(sum(b.delay_penalty(int(s)) for b, s in zip(scenario.time_flexible, starts)))
    weights = np.array([c.discomfort_weight for c in scenario.power_flexible]).reshape(-1, 1)
    deviations = controls[1:] * activity_mask(scenario, t_now, controls.shape[1])
    f_pf = float(np.sum(weights * deviations**2))
    return f_tf, f_pf, f_tf + f_pf


def evaluate_controls(scenario, forecast, controls, starts, t_now: int) -> ObjectiveValues:
    cost = evaluate_cost(scenario, forecast, controls, starts, t_now)
    f_tf, f_pf, total = evaluate_dissatisfaction(scenario, controls, starts, t_now)
    return ObjectiveValues(cost=cost, dissatisfaction=total, time_flexible=f_tf, power_flexible=f_pf)


def evaluate(chromosome, scenario, forecast, basis, t_now: int) -> ObjectiveValues:
    controls = reconstruct_controls(basis, chromosome.eta, scenario.flexible_count)
    return evaluate_controls(scenario, forecast, controls, chromosome.starts, t_now)
