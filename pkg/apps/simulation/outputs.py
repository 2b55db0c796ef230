# apps/simulation/outputs.py
"""
Escritura de resultados. Esquemas fijos:

schedule.csv      slot, price_true, price_forecast_t0, renewable, inflexible_load,
                  battery_power, battery_energy, <potencia por electrodoméstico>,
                  p_total, slot_cost, fallback
pareto_<slot>.csv cost, dissatisfaction, knee
convergence.csv   ver ``CONVERGENCE_COLUMNS``
summary.yaml      documento YAML con totales
"""
import logging
from pathlib import Path
from typing import Dict, Iterable, List

import pandas as pd
import yaml

from apps.optimizer.pareto import CONVERGENCE_COLUMNS

from .services import SimulationTrace

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"


def _to_csv(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def schedule_columns(scenario) -> List[str]:
    appliances = [b.name for b in scenario.time_flexible] + [c.name for c in scenario.power_flexible]
    return (
        ["slot", "price_true", "price_forecast_t0", "renewable", "inflexible_load", "battery_power", "battery_energy"]
        + appliances
        + ["p_total", "slot_cost", "fallback"]
    )


def schedule_frame(trace: SimulationTrace, scenario) -> pd.DataFrame:
    rows = []
    for record in trace.slots:
        row = {
            "slot": record.slot,
            "price_true": record.price_true,
            "price_forecast_t0": record.price_forecast_t0,
            "renewable": record.renewable,
            "inflexible_load": record.inflexible_load,
            "battery_power": record.battery_power,
            "battery_energy": record.battery_energy,
        }
        row.update({b.name: p for b, p in zip(scenario.time_flexible, record.time_flexible_power)})
        row.update({c.name: p for c, p in zip(scenario.power_flexible, record.flexible_power)})
        row.update({"p_total": record.p_total, "slot_cost": record.slot_cost, "fallback": int(record.fallback)})
        rows.append(row)
    return pd.DataFrame(rows, columns=schedule_columns(scenario))


def pareto_frame(front, knee_index) -> pd.DataFrame:
    frame = pd.DataFrame(list(front), columns=["cost", "dissatisfaction"])
    frame["knee"] = [int(i == knee_index) for i in range(len(frame))]
    return frame


def convergence_frame(rows: Iterable[Dict]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=CONVERGENCE_COLUMNS)


def write_pareto(front, knee_index, directory, slot: int) -> Path:
    return _to_csv(pareto_frame(front, knee_index), Path(directory) / f"pareto_{slot}.csv")


def write_convergence(rows: Iterable[Dict], directory) -> Path:
    return _to_csv(convergence_frame(rows), Path(directory) / "convergence.csv")


def write_summary(document: Dict, directory) -> Path:
    path = Path(directory) / "summary.yaml"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        yaml.safe_dump(document, handle, sort_keys=False, allow_unicode=True)
    return path


def write_trace(trace: SimulationTrace, scenario, directory, extra: Dict = None) -> Path:
    """schedule.csv + pareto_<slot>.csv + convergence.csv + summary.yaml de una corrida."""
    directory = Path(directory)
    _to_csv(schedule_frame(trace, scenario), directory / "schedule.csv")
    convergence = []
    for solve in trace.solves:
        write_pareto(solve.front, solve.knee_index, directory, solve.slot)
        convergence.extend(solve.log.to_rows(slot=solve.slot))
    write_convergence(convergence, directory)
    summary = trace.summary()
    summary.update(extra or {})
    write_summary(summary, directory)
    logger.info("Resultados escritos en %s", directory)
    return directory


def run_directory(root, solver: str, seed: int, profile: str = None) -> Path:
    path = Path(root) / solver / f"seed_{seed}"
    return path / profile if profile else path
