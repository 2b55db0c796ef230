# apps/control/constraints.py
"""
Conjunto factible A'·η ≤ b' en el espacio de coeficientes de Laguerre.

Orden de filas por paso m del horizonte (estable, los muestreadores
dependen de él):
    rate-upper(m), rate-lower(m),
    appliance-upper(c,m), appliance-lower(c,m)   (solo si c está activo en t_now+m),
    energy-upper(m+1), energy-lower(m+1)
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from django.conf import settings

from apps.common.exceptions import InfeasibleScenarioError, ParameterError, PreconditionError

from .laguerre import LaguerreBasis, PredictionOperators

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-9


def default_tolerance() -> float:
    return float(getattr(settings, "HOMEFLEX", {}).get("FEASIBILITY_TOLERANCE", DEFAULT_TOLERANCE))


@dataclass(frozen=True)
class FeasibleSet:
    A: np.ndarray
    b: np.ndarray
    row_labels: Tuple[str, ...]
    tolerance: float
    horizon: int
    t_now: int
    box: np.ndarray      # cota simétrica |η_j| ≤ box_j usada para muestrear puntos aleatorios
    active: np.ndarray   # coeficientes que aparecen en alguna fila

    @property
    def dimension(self) -> int:
        return self.A.shape[1]

    def __len__(self):
        return self.A.shape[0]


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    row_label: Optional[str]
    slack: float

    def __bool__(self):
        return self.feasible


def _check_dimension(fset: FeasibleSet, eta) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (fset.dimension,):
        raise ParameterError(f"η debe tener {fset.dimension} coeficientes, tiene {eta.size}")
    return eta


def row_slacks(fset: FeasibleSet, eta) -> np.ndarray:
    """b − A·η (negativo = fila violada)."""
    return fset.b - fset.A @ _check_dimension(fset, eta)


def is_feasible(fset: FeasibleSet, eta) -> FeasibilityReport:
    slacks = row_slacks(fset, eta)
    if slacks.size == 0:
        return FeasibilityReport(True, None, float("inf"))
    worst = int(np.argmin(slacks))
    return FeasibilityReport(bool(slacks[worst] >= -fset.tolerance), fset.row_labels[worst], float(slacks[worst]))


def require_feasible(fset: FeasibleSet, eta) -> np.ndarray:
    report = is_feasible(fset, eta)
    if not report:
        raise PreconditionError(f"Punto no factible: fila {report.row_label} con holgura {report.slack:.3g}")
    return np.asarray(eta, dtype=float)


def build_feasible_set(
    scenario,
    basis: LaguerreBasis,
    ops: PredictionOperators,
    x0,
    t_now: int,
    tolerance: Optional[float] = None,
    allow_infeasible_origin: bool = False,
) -> FeasibleSet:
    """
    Construye las filas de tasa, potencia y energía para el horizonte de ``basis``.

    Con ``allow_infeasible_origin=False`` exige que η = 0 sea factible y, si
    no lo es, lanza InfeasibleScenarioError con la fila violada.
    """
    tolerance = default_tolerance() if tolerance is None else float(tolerance)
    scenario.grid.check(t_now)
    bat = scenario.battery
    x0 = np.asarray(x0, dtype=float)
    if not bat.capacity_min - tolerance <= x0[0] <= bat.capacity_max + tolerance:
        raise PreconditionError(
            f"E_s = {x0[0]:.6g} kWh fuera de [{bat.capacity_min}, {bat.capacity_max}]"
        )
    horizon = basis.horizon
    if ops.horizon != horizon:
        raise ParameterError("La base y los operadores de predicción tienen horizontes distintos")
    if t_now + horizon - 1 > scenario.grid.slot_count:
        raise ParameterError(f"El horizonte {horizon} desde el slot {t_now} excede la rejilla")

    order = basis.order
    n = (1 + scenario.flexible_count) * order
    rows, bounds, labels = [], [], []

    def block_row(block: int, vector) -> np.ndarray:
        row = np.zeros(n)
        row[block * order:(block + 1) * order] = vector
        return row

    for m in range(horizon):
        slot = t_now + m
        l_m = basis.vectors[m]

        rows += [block_row(0, l_m), block_row(0, -l_m)]
        bounds += [bat.max_rate, bat.max_rate]
        labels += [f"rate-upper({m})", f"rate-lower({m})"]

        for k, appliance in enumerate(scenario.power_flexible, start=1):
            if not appliance.is_active(slot):
                continue
            low, high = appliance.deviation_bounds
            rows += [block_row(k, l_m), block_row(k, -l_m)]
            bounds += [high, -low]
            labels += [f"appliance-upper({appliance.name},{m})", f"appliance-lower({appliance.name},{m})"]

        energy_row = ops.phi[m + 1][0]
        drift = float((ops.A_powers[m + 1] @ x0)[0])
        rows += [energy_row.copy(), -energy_row]
        bounds += [bat.capacity_max - drift, drift - bat.capacity_min]
        labels += [f"energy-upper({m + 1})", f"energy-lower({m + 1})"]

    A = np.vstack(rows)
    b = np.asarray(bounds, dtype=float)
    active = np.any(np.abs(A) > 0.0, axis=0)
    fset = FeasibleSet(
        A=A, b=b, row_labels=tuple(labels), tolerance=tolerance, horizon=horizon,
        t_now=t_now, box=_coefficient_box(scenario, basis, t_now, active), active=active,
    )
    for array in (fset.A, fset.b, fset.box, fset.active):
        array.setflags(write=False)

    origin = is_feasible(fset, np.zeros(n))
    if not origin:
        if not allow_infeasible_origin:
            raise InfeasibleScenarioError(
                f"η = 0 no es factible en el slot {t_now}: fila {origin.row_label} "
                f"(holgura {origin.slack:.6g})",
                row_label=origin.row_label,
                slack=origin.slack,
            )
        logger.debug("η = 0 no factible en el slot %s (%s)", t_now, origin.row_label)
    return fset


def _coefficient_box(scenario, basis: LaguerreBasis, t_now: int, active) -> np.ndarray:
    """|η_j| ≤ cota de potencia / max_m |l_j(m)|; 0 para coeficientes sin filas."""
    peak = basis.peak()
    safe_peak = np.where(peak > 1e-12, peak, np.inf)
    blocks = [np.full(basis.order, scenario.battery.max_rate)]
    slots = range(t_now, t_now + basis.horizon)
    for appliance in scenario.power_flexible:
        low, high = appliance.deviation_bounds
        live = any(appliance.is_active(s) for s in slots)
        blocks.append(np.full(basis.order, max(abs(low), abs(high)) if live else 0.0))
    box = np.concatenate([block / safe_peak for block in blocks])
    return np.where(active, box, 0.0)


def dump_feasible_set(fset: FeasibleSet, path) -> Path:
    """CSV de depuración: label, a0..a{n-1}, b."""
    path = Path(path)
    frame = pd.DataFrame(fset.A, columns=[f"a{j}" for j in range(fset.dimension)])
    frame.insert(0, "label", list(fset.row_labels))
    frame["b"] = fset.b
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return path
