# apps/household/entities.py
"""
Entidades físicas y económicas del hogar.

Todas son dataclasses inmutables. La validación de invariantes no ocurre
en el constructor: ``validators.scenario_violations`` recorre el escenario
completo y devuelve *todas* las violaciones (así ``validate`` puede
listarlas de una sola vez).

Convención de slots: los slots son 1-based (slot 1 = primer intervalo
del día, 8-9 A.M. en el escenario de referencia). Los arrays numpy se
indexan con ``slot - 1``.
"""
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Optional, Tuple

import numpy as np

from apps.common.exceptions import ConstraintViolationError, SlotRangeError

Window = Tuple[int, int]


def _as_window(value) -> Window:
    start, end = value
    return int(start), int(end)


def _as_series(values) -> Tuple[float, ...]:
    return tuple(float(v) for v in values)


# ====================================================
# Rejilla temporal
# ====================================================
@dataclass(frozen=True)
class TimeGrid:
    slot_count: int = 24
    slot_duration: float = 1.0  # Δt en horas
    origin_label: str = "08:00"

    def slots(self) -> range:
        return range(1, self.slot_count + 1)

    def contains(self, slot: int) -> bool:
        return 1 <= slot <= self.slot_count

    def check(self, slot: int) -> int:
        if not self.contains(slot):
            raise SlotRangeError(f"Slot {slot} fuera de la rejilla 1..{self.slot_count}")
        return slot

    def index(self, slot: int) -> int:
        """Slot 1-based → índice 0-based."""
        return self.check(slot) - 1

    def slot(self, index: int) -> int:
        """Índice 0-based → slot 1-based (inversa de ``index``)."""
        return self.check(index + 1)

    def remaining(self, t_now: int) -> int:
        """Slots que quedan en el día contando el actual."""
        return self.slot_count - self.check(t_now) + 1

    def clock_label(self, slot: int) -> str:
        origin = datetime.strptime(self.origin_label, "%H:%M")
        start = origin + timedelta(hours=self.slot_duration * self.index(slot))
        return start.strftime("%H:%M")


# ====================================================
# Electrodomésticos
# ====================================================
@dataclass(frozen=True)
class InflexibleAppliance:
    """Consumo fijo γ_a en una o varias ventanas [α, β] (p.ej. P_a3 con 3 ventanas)."""
    name: str
    rated_power: float
    windows: Tuple[Window, ...]

    def __post_init__(self):
        object.__setattr__(self, "windows", tuple(_as_window(w) for w in self.windows))

    def is_active(self, slot: int) -> bool:
        return any(start <= slot <= end for start, end in self.windows)


@dataclass(frozen=True)
class TimeFlexibleAppliance:
    """Carga desplazable: perfil fijo de T_b slots con arranque t_b ∈ [α_b, β_b − T_b + 1]."""
    name: str
    rated_power: float
    window: Window
    duration: int
    requested_start: int
    discomfort_weight: float
    delay_exponent: float

    def __post_init__(self):
        object.__setattr__(self, "window", _as_window(self.window))

    @property
    def earliest_start(self) -> int:
        return self.window[0]

    @property
    def latest_start(self) -> int:
        return self.window[1] - self.duration + 1

    def admissible_starts(self, t_now: int) -> Tuple[int, int]:
        """
        Rango de arranques que el optimizador puede proponer en t_now.
        No se permiten arranques anteriores a t_req (solo se penaliza el retraso);
        si el horizonte ya pasó t_req, el rango empieza en t_now.
        """
        low = max(self.requested_start, t_now)
        if low > self.latest_start:
            raise ConstraintViolationError(
                f"'{self.name}' ya no puede arrancar en el slot {t_now} (último arranque {self.latest_start})"
            )
        return low, self.latest_start

    def check_start(self, start: int) -> int:
        if not self.earliest_start <= start <= self.latest_start:
            raise ConstraintViolationError(
                f"Arranque {start} de '{self.name}' fuera de [{self.earliest_start}, {self.latest_start}]"
            )
        return start

    def is_running(self, start: int, slot: int) -> bool:
        return start <= slot <= start + self.duration - 1

    def delay_penalty(self, start: int) -> float:
        delay = start - self.requested_start
        if delay < 0:
            raise ConstraintViolationError(
                f"Arranque anticipado de '{self.name}' ({start} < {self.requested_start})"
            )
        return self.discomfort_weight * float(delay) ** self.delay_exponent


@dataclass(frozen=True)
class PowerFlexibleAppliance:
    """Potencia regulable en [γ_min, γ_max] dentro de [α_c, β_c]; pérdida de Taguchi ξ_c."""
    name: str
    min_power: float
    max_power: float
    window: Window
    discomfort_weight: float
    nominal_power: float

    def __post_init__(self):
        object.__setattr__(self, "window", _as_window(self.window))

    def is_active(self, slot: int) -> bool:
        return self.window[0] <= slot <= self.window[1]

    @property
    def deviation_bounds(self) -> Tuple[float, float]:
        """Cotas sobre la desviación respecto a P_nor (parametrización por desviación)."""
        return self.min_power - self.nominal_power, self.max_power - self.nominal_power


# ====================================================
# Batería y tarifa
# ====================================================
@dataclass(frozen=True)
class Battery:
    leakage_per_slot: float  # ρ
    max_rate: float          # S_max (kW)
    capacity_min: float      # E_min (kWh)
    capacity_max: float      # E_max (kWh)
    initial_energy: float    # kWh

    @staticmethod
    def leakage_from_retention(daily_retention: float, slot_duration: float) -> float:
        """ρ por slot a partir de la retención diaria (0.9 → 0.9^(Δt/24))."""
        return float(daily_retention) ** (float(slot_duration) / 24.0)

    def daily_retention(self, slot_duration: float) -> float:
        """Inversa de ``leakage_from_retention``: ρ^(24/Δt)."""
        return float(self.leakage_per_slot) ** (24.0 / float(slot_duration))


@dataclass(frozen=True)
class Tariff:
    market_price: Tuple[float, ...]
    feed_in_rate: float

    def __post_init__(self):
        object.__setattr__(self, "market_price", _as_series(self.market_price))

    def price(self, slot: int) -> float:
        if not 1 <= slot <= len(self.market_price):
            raise SlotRangeError(f"Slot {slot} fuera de la tarifa 1..{len(self.market_price)}")
        return self.market_price[slot - 1]

    @property
    def prices(self) -> np.ndarray:
        return np.asarray(self.market_price, dtype=float)


# ====================================================
# Escenario completo
# ====================================================
@dataclass(frozen=True)
class Scenario:
    grid: TimeGrid
    inflexible: Tuple[InflexibleAppliance, ...]
    time_flexible: Tuple[TimeFlexibleAppliance, ...]
    power_flexible: Tuple[PowerFlexibleAppliance, ...]
    battery: Battery
    tariff: Tariff
    renewable_true: Tuple[float, ...]
    load_true: Optional[Tuple[float, ...]] = None
    name: str = "scenario"
    notes: str = ""
    source: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "inflexible", tuple(self.inflexible))
        object.__setattr__(self, "time_flexible", tuple(self.time_flexible))
        object.__setattr__(self, "power_flexible", tuple(self.power_flexible))
        object.__setattr__(self, "renewable_true", _as_series(self.renewable_true))
        if self.load_true is not None:
            object.__setattr__(self, "load_true", _as_series(self.load_true))

    @property
    def flexible_count(self) -> int:
        """ℓ = |A_pf|."""
        return len(self.power_flexible)

    @property
    def default_starts(self) -> Tuple[int, ...]:
        return tuple(b.requested_start for b in self.time_flexible)

    def price_series(self) -> np.ndarray:
        return self.tariff.prices

    def renewable_series(self) -> np.ndarray:
        return np.asarray(self.renewable_true, dtype=float)

    def load_series(self) -> np.ndarray:
        """Carga inflexible real: columna ``load`` si existe, si no la de los electrodomésticos."""
        if self.load_true is not None:
            return np.asarray(self.load_true, dtype=float)
        from .power import inflexible_profile

        return inflexible_profile(self)
