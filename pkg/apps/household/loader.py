# apps/household/loader.py
"""
Lectura de escenarios.

Formato del archivo ``.scenario`` (YAML)::

    name: reference_home
    grid: {slot_count: 24, slot_duration: 1.0, origin_label: "08:00"}
    inflexible:
      - {name: a1, rated_power: 0.2, windows: [[1, 24]]}
    time_flexible:
      - {name: b1, rated_power: 0.7, window: [11, 23], duration: 2,
         requested_start: 11, discomfort_weight: 0.001, delay_exponent: 3}
    power_flexible:
      - {name: c1, min_power: 0.2, max_power: 0.8, window: [11, 16],
         discomfort_weight: 1.0, nominal_power: 0.8}
    battery:
      leakage: 0.9          # retención diaria; ρ = 0.9^(Δt/24)
      max_rate: 3.0
      capacity_min: 3.0
      capacity_max: 10.0
      initial_energy: 4.0
    tariff: {feed_in_rate: 2.5}   # obligatorio, sin valor por defecto
    series: reference_home_series.csv     # relativo al archivo .scenario

Series CSV: cabecera ``slot,price,solar,load`` (``load`` opcional), un
renglón por slot, slots 1-based y consecutivos.
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
import yaml
from django.core.exceptions import ValidationError

from .entities import (
    Battery,
    InflexibleAppliance,
    PowerFlexibleAppliance,
    Scenario,
    Tariff,
    TimeFlexibleAppliance,
    TimeGrid,
)
from .validators import validate_scenario

logger = logging.getLogger(__name__)

SERIES_COLUMNS = ["slot", "price", "solar", "load"]


class _Fields:
    """Acceso a un mapeo YAML acumulando errores con la ruta del campo."""

    def __init__(self, data: Any, path: str, errors: List[str]):
        self.data = data if isinstance(data, dict) else {}
        self.path = path
        self.errors = errors
        if not isinstance(data, dict):
            errors.append(f"{path}: se esperaba un mapeo clave-valor.")

    def get(self, key, cast=float, default=..., required=True):
        name = f"{self.path}.{key}" if self.path else key
        if key not in self.data or self.data[key] is None:
            if default is not ...:
                return default
            if required:
                self.errors.append(f"{name}: campo obligatorio ausente.")
            return None
        try:
            return cast(self.data[key])
        except (TypeError, ValueError):
            self.errors.append(f"{name}: valor inválido {self.data[key]!r}.")
            return None


def _window(value):
    start, end = value
    return int(start), int(end)


def _windows(value):
    return tuple(_window(w) for w in value)


def read_series(path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"series: no existe el archivo {path}")
    try:
        frame = pd.read_csv(path)
    except Exception as exc:
        raise ValidationError(f"series: no se pudo leer {path}: {exc}")
    missing = [c for c in ("slot", "price", "solar") if c not in frame.columns]
    if missing:
        raise ValidationError(f"series: {path} sin columnas {', '.join(missing)}")
    expected = list(range(1, len(frame) + 1))
    if frame["slot"].astype(int).tolist() != expected:
        raise ValidationError(f"series: {path} debe tener slots consecutivos 1..{len(frame)}")
    return frame


def parse_scenario(data: Dict[str, Any], series: Optional[pd.DataFrame] = None, source=None) -> Scenario:
    """Construye y valida un Scenario a partir del documento ya cargado."""
    errors: List[str] = []
    root = _Fields(data, "", errors)

    grid_f = _Fields(root.data.get("grid", {}), "grid", errors)
    grid = TimeGrid(
        slot_count=grid_f.get("slot_count", int, default=24),
        slot_duration=grid_f.get("slot_duration", float, default=1.0),
        origin_label=grid_f.get("origin_label", str, default="08:00"),
    )

    def build(kind, factory, items):
        built = []
        for i, item in enumerate(items or []):
            fields = _Fields(item, f"{kind}[{i}]", errors)
            obj = factory(fields, i)
            if obj is not None:
                built.append(obj)
        return built

    def make_inflexible(f, i):
        values = dict(
            name=f.get("name", str, default=f"a{i + 1}"),
            rated_power=f.get("rated_power"),
            windows=f.get("windows", _windows),
        )
        return None if None in values.values() else InflexibleAppliance(**values)

    def make_time_flexible(f, i):
        values = dict(
            name=f.get("name", str, default=f"b{i + 1}"),
            rated_power=f.get("rated_power"),
            window=f.get("window", _window),
            duration=f.get("duration", int),
            requested_start=f.get("requested_start", int),
            discomfort_weight=f.get("discomfort_weight"),
            delay_exponent=f.get("delay_exponent"),
        )
        return None if None in values.values() else TimeFlexibleAppliance(**values)

    def make_power_flexible(f, i):
        values = dict(
            name=f.get("name", str, default=f"c{i + 1}"),
            min_power=f.get("min_power"),
            max_power=f.get("max_power"),
            window=f.get("window", _window),
            discomfort_weight=f.get("discomfort_weight"),
            nominal_power=f.get("nominal_power"),
        )
        return None if None in values.values() else PowerFlexibleAppliance(**values)

    inflexible = build("inflexible", make_inflexible, root.data.get("inflexible"))
    time_flexible = build("time_flexible", make_time_flexible, root.data.get("time_flexible"))
    power_flexible = build("power_flexible", make_power_flexible, root.data.get("power_flexible"))

    bat_f = _Fields(root.data.get("battery"), "battery", errors)
    retention = bat_f.get("leakage", required=False)
    per_slot = bat_f.get("leakage_per_slot", required=False)
    if per_slot is None and retention is None:
        errors.append("battery.leakage: campo obligatorio ausente (retención diaria, p.ej. 0.9).")
    elif per_slot is None:
        if not 0 < retention <= 1:
            errors.append(f"battery.leakage: la retención diaria debe estar en (0, 1] (vale {retention}).")
        else:
            per_slot = Battery.leakage_from_retention(retention, grid.slot_duration)
    battery_values = dict(
        leakage_per_slot=per_slot,
        max_rate=bat_f.get("max_rate"),
        capacity_min=bat_f.get("capacity_min"),
        capacity_max=bat_f.get("capacity_max"),
        initial_energy=bat_f.get("initial_energy"),
    )

    tariff_f = _Fields(root.data.get("tariff"), "tariff", errors)
    feed_in = tariff_f.get("feed_in_rate")

    if series is None:
        errors.append("series: no se indicó archivo de series (campo 'series' o --series).")

    if errors:
        raise ValidationError(errors)

    load = series["load"].astype(float).tolist() if "load" in series.columns else None
    scenario = Scenario(
        grid=grid,
        inflexible=inflexible,
        time_flexible=time_flexible,
        power_flexible=power_flexible,
        battery=Battery(**battery_values),
        tariff=Tariff(market_price=series["price"].astype(float).tolist(), feed_in_rate=feed_in),
        renewable_true=series["solar"].astype(float).tolist(),
        load_true=load,
        name=root.get("name", str, default="scenario"),
        notes=root.get("notes", str, default=""),
        source=str(source) if source else None,
    )
    return validate_scenario(scenario)


def load_scenario(path, series_path=None) -> Scenario:
    """Lee ``path`` (YAML) y su archivo de series; lanza ValidationError con todos los problemas."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"scenario: no existe el archivo {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ValidationError(f"scenario: {path} no es un documento válido: {exc}")

    if series_path is None and isinstance(data, dict) and data.get("series"):
        series_path = path.parent / str(data["series"])
    series = read_series(series_path) if series_path is not None else None
    scenario = parse_scenario(data, series, source=path)
    logger.debug("Escenario %s cargado desde %s", scenario.name, path)
    return scenario


def describe_scenario(scenario: Scenario) -> Dict[str, Any]:
    """Parámetros efectivos normalizados (lo que imprime ``validate``)."""
    bat = scenario.battery
    return {
        "name": scenario.name,
        "grid": {
            "slot_count": scenario.grid.slot_count,
            "slot_duration": scenario.grid.slot_duration,
            "origin_label": scenario.grid.origin_label,
        },
        "appliances": {
            "inflexible": len(scenario.inflexible),
            "time_flexible": len(scenario.time_flexible),
            "power_flexible": len(scenario.power_flexible),
        },
        "battery": {
            "leakage_per_slot": bat.leakage_per_slot,
            "daily_retention": bat.daily_retention(scenario.grid.slot_duration),
            "max_rate": bat.max_rate,
            "capacity_min": bat.capacity_min,
            "capacity_max": bat.capacity_max,
            "initial_energy": bat.initial_energy,
        },
        "tariff": {
            "feed_in_rate": scenario.tariff.feed_in_rate,
            "min_price": min(scenario.tariff.market_price),
            "max_price": max(scenario.tariff.market_price),
        },
        "load_source": "series" if scenario.load_true is not None else "appliances",
    }
