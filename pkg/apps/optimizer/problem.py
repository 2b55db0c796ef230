# apps/optimizer/problem.py
"""
Problema de un horizonte: todo lo que un solver necesita en el slot t_now.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Optional, Tuple

import numpy as np

from apps.common.exceptions import ConstraintViolationError
from apps.control.constraints import FeasibleSet, build_feasible_set
from apps.control.laguerre import (
    LaguerreBasis,
    LaguerreSettings,
    StateSpaceModel,
    build_basis,
    build_prediction,
)

from .objectives import ForecastBundle, ObjectiveValues, evaluate

logger = logging.getLogger(__name__)


def effective_horizon(slot_count: int, t_now: int, horizon: int) -> int:
    """M_eff = min(M, slots restantes del día)."""
    return min(horizon, slot_count - t_now + 1)


@dataclass
class HorizonProblem:
    scenario: object
    forecast: ForecastBundle
    basis: LaguerreBasis
    fset: FeasibleSet
    t_now: int
    x0: np.ndarray
    committed: Dict[int, int] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        scenario,
        forecast: ForecastBundle,
        laguerre: LaguerreSettings,
        x0,
        t_now: int,
        committed: Optional[Dict[int, int]] = None,
        tolerance: Optional[float] = None,
        strict: bool = True,
    ) -> "HorizonProblem":
        horizon = effective_horizon(scenario.grid.slot_count, t_now, laguerre.horizon)
        basis = build_basis(float(laguerre.pole), int(laguerre.order), horizon)
        ops = build_prediction(basis, StateSpaceModel.from_scenario(scenario))
        x0 = np.asarray(x0, dtype=float)
        fset = build_feasible_set(
            scenario, basis, ops, x0, t_now, tolerance=tolerance, allow_infeasible_origin=not strict
        )
        return cls(scenario, forecast, basis, fset, t_now, x0, dict(committed or {}))

    @property
    def horizon(self) -> int:
        return self.basis.horizon

    @property
    def dimension(self) -> int:
        return self.fset.dimension

    @cached_property
    def start_ranges(self) -> Tuple[Tuple[int, int], ...]:
        """Rango admisible de arranque por desplazable (fijo si ya está comprometido)."""
        ranges = []
        for i, appliance in enumerate(self.scenario.time_flexible):
            if i in self.committed:
                ranges.append((self.committed[i], self.committed[i]))
                continue
            try:
                ranges.append(appliance.admissible_starts(self.t_now))
            except ConstraintViolationError:
                # ya no puede arrancar dentro de su ventana: queda en el arranque pedido
                logger.warning("'%s' sin arranque admisible en el slot %s", appliance.name, self.t_now)
                ranges.append((appliance.requested_start, appliance.requested_start))
        return tuple(ranges)

    def sample_starts(self, rng) -> Tuple[int, ...]:
        return tuple(rng.integer(low, high) for low, high in self.start_ranges)

    def evaluate(self, chromosome) -> ObjectiveValues:
        chromosome.objectives = evaluate(chromosome, self.scenario, self.forecast, self.basis, self.t_now)
        return chromosome.objectives
