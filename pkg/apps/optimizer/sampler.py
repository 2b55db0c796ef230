# apps/optimizer/sampler.py
"""
Muestreadores convexos sobre {η : A·η ≤ b}.

Ambos parten de un punto factible y se mueven sobre una cuerda del
politopo; la longitud de la cuerda es el mayor paso que no viola ninguna
fila, así que la salida es factible por construcción.
"""
import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from apps.common.exceptions import InfeasibleScenarioError
from apps.control.constraints import FeasibleSet, is_feasible, require_feasible

logger = logging.getLogger(__name__)

DEFAULT_STEP_CAP = 1e3
_ROW_EPSILON = 1e-13
_DIRECTION_EPSILON = 1e-12
_DIRECTION_ATTEMPTS = 8
_LADDER_RUNGS = 40


def default_step_cap() -> float:
    return float(getattr(settings, "HOMEFLEX", {}).get("STEP_CAP", DEFAULT_STEP_CAP))


@dataclass(frozen=True)
class StepBounds:
    d_pos: float
    d_neg: float

    @property
    def width(self) -> float:
        return self.d_pos + self.d_neg


def _bounds_from(slack: np.ndarray, projected: np.ndarray, step_cap: float) -> StepBounds:
    slack = np.maximum(slack, 0.0)
    up = projected > _ROW_EPSILON
    down = projected < -_ROW_EPSILON
    d_pos = min(step_cap, float(np.min(slack[up] / projected[up]))) if up.any() else step_cap
    d_neg = min(step_cap, float(np.min(slack[down] / -projected[down]))) if down.any() else step_cap
    return StepBounds(max(d_pos, 0.0), max(d_neg, 0.0))


def line_bounds(fset: FeasibleSet, eta, direction, step_cap: float = None) -> StepBounds:
    """Pasos máximos factibles desde ``eta`` en ±direction."""
    step_cap = default_step_cap() if step_cap is None else step_cap
    eta = require_feasible(fset, eta)
    return _bounds_from(fset.b - fset.A @ eta, fset.A @ np.asarray(direction, dtype=float), step_cap)


def _vertex_or_uniform(rng, iteration: int) -> float:
    if iteration % 5 == 0:
        return float(rng.integer(0, 1))
    return float(rng.uniform())


def sampler_one(fset: FeasibleSet, eta, coordinates, iteration: int, rng, step_cap: float = None) -> np.ndarray:
    """Muestreo coordenada a coordenada; cada paso ve el punto ya actualizado."""
    step_cap = default_step_cap() if step_cap is None else step_cap
    eta = require_feasible(fset, eta).copy()
    slack = fset.b - fset.A @ eta
    for i in coordinates:
        column = fset.A[:, i]
        bounds = _bounds_from(slack, column, step_cap)
        delta = -bounds.d_neg + bounds.width * _vertex_or_uniform(rng, iteration)
        eta[i] += delta
        slack = slack - column * delta
    return eta


def sampler_two(fset: FeasibleSet, eta, rng, step_cap: float = None) -> np.ndarray:
    """Paso sobre la cuerda que une ``eta`` con un punto aleatorio de la caja."""
    step_cap = default_step_cap() if step_cap is None else step_cap
    eta = require_feasible(fset, eta)
    for _ in range(_DIRECTION_ATTEMPTS):
        direction = rng.uniform(-fset.box, fset.box) - eta
        if np.linalg.norm(direction) >= _DIRECTION_EPSILON:
            break
    else:
        return eta.copy()
    bounds = _bounds_from(fset.b - fset.A @ eta, fset.A @ direction, step_cap)
    step = -bounds.d_neg + bounds.width * float(rng.uniform())
    return eta + step * direction


def coordinate_subset(fset: FeasibleSet, rng, probability: float) -> list:
    """Subconjunto E de coeficientes activos; al menos uno siempre."""
    candidates = np.flatnonzero(fset.active)
    if candidates.size == 0:
        return []
    chosen = [int(i) for i in candidates if rng.coin(probability)]
    if not chosen:
        chosen = [int(candidates[rng.index(candidates.size)])]
    return chosen


def initial_point(fset: FeasibleSet, rng=None, diversify_steps: int = 0, step_cap: float = None) -> np.ndarray:
    """
    η = 0 si es factible. Si no (batería al límite inferior), prueba cargas
    crecientes c·e₀ hasta la cota de caja del primer coeficiente de batería.
    """
    eta = np.zeros(fset.dimension)
    if not is_feasible(fset, eta):
        eta = _charging_ladder(fset)
    for _ in range(diversify_steps if rng is not None else 0):
        eta = sampler_two(fset, eta, rng, step_cap)
    return eta


def _charging_ladder(fset: FeasibleSet) -> np.ndarray:
    top = float(fset.box[0])
    origin = is_feasible(fset, np.zeros(fset.dimension))
    if top > 0:
        for c in np.geomspace(top * 1e-4, top, _LADDER_RUNGS):
            eta = np.zeros(fset.dimension)
            eta[0] = c
            if is_feasible(fset, eta):
                logger.warning("η = 0 no factible en el slot %s; se usa carga c=%.4g", fset.t_now, c)
                return eta
    raise InfeasibleScenarioError(
        f"No hay punto inicial factible en el slot {fset.t_now}: fila {origin.row_label}",
        row_label=origin.row_label,
        slack=origin.slack,
    )
