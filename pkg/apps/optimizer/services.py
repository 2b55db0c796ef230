# apps/optimizer/services.py
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

from .baselines import solve_constraint_dominated, solve_penalty
from .moea import MoeaConfig, evolve
from .pareto import ConvergenceLog, select_knee
from .problem import HorizonProblem

logger = logging.getLogger(__name__)


@dataclass
class SolveResult:
    solver: str
    front: List[Any]
    log: ConvergenceLog
    evaluations: int
    knee_index: Optional[int] = None
    fallback: Optional[Any] = None

    @property
    def knee(self):
        return None if self.knee_index is None else self.front[self.knee_index]

    def values(self):
        return [c.objectives.pair for c in self.front]


class SolverService:
    """
    Registro de solvers por nombre.
    Handlers registrados con @SolverService.register("<nombre>").
    Cada handler recibe (problem, config, rng) y devuelve un SolveResult sin rodilla.
    """
    registry: Dict[str, Callable] = {}

    @classmethod
    def register(cls, name: str):
        def _inner(fn):
            cls.registry[name] = fn
            return fn
        return _inner

    @classmethod
    def names(cls) -> List[str]:
        return sorted(cls.registry)

    @classmethod
    def run(cls, name: str, problem: HorizonProblem, config: MoeaConfig, rng) -> SolveResult:
        handler = cls.registry.get(name)
        if handler is None:
            raise ValueError(f"No hay solver registrado para: {name!r}")
        result = handler(problem, config, rng)
        if result.front:
            result.knee_index = select_knee(result.values())
            knee = result.knee.objectives
            logger.info(
                "[%s] slot %s: frente=%s rodilla=(%.4f, %.4f) evals=%s",
                name, problem.t_now, len(result.front), knee.cost, knee.dissatisfaction, result.evaluations,
            )
        else:
            logger.info("[%s] slot %s: frente vacío, evals=%s", name, problem.t_now, result.evaluations)
        return result


# ====================================================
# Handlers
# ====================================================
@SolverService.register("proposed")
def _proposed(problem, config, rng) -> SolveResult:
    result = evolve(problem, config, rng, solver="proposed")
    return SolveResult("proposed", result.front, result.log, result.evaluations)


@SolverService.register("penalty")
def _penalty(problem, config, rng) -> SolveResult:
    result = solve_penalty(problem, config, rng)
    return SolveResult("penalty", result.front, result.log, result.evaluations, fallback=result.fallback)


@SolverService.register("cdom")
def _cdom(problem, config, rng) -> SolveResult:
    result = solve_constraint_dominated(problem, config, rng)
    return SolveResult("cdom", result.front, result.log, result.evaluations, fallback=result.fallback)
