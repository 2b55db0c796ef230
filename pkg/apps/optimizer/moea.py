# apps/optimizer/moea.py
"""
Algoritmo evolutivo multiobjetivo que preserva factibilidad.

Cada cromosoma = arranques de los desplazables + vector η de Laguerre.
Todos los operadores (inicialización, cruce convexo, mutación con los
muestreadores) producen puntos dentro del politopo; la eliminación de
infactibles se mantiene como verificación y se registra si llega a ocurrir.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from django.conf import settings

from apps.common.exceptions import ParameterError
from apps.control.constraints import DEFAULT_TOLERANCE, is_feasible
from apps.control.laguerre import reconstruct_controls

from .objectives import ObjectiveValues
from .pareto import (
    ConvergenceLog,
    ParetoArchive,
    crowding_by_rank,
    crowding_distance,
    environmental_selection,
    front_ranges,
    nondominated_sort,
    reference_point,
)
from .problem import HorizonProblem
from .sampler import DEFAULT_STEP_CAP, coordinate_subset, initial_point, sampler_one, sampler_two

logger = logging.getLogger(__name__)

INIT_COORDINATE_PROBABILITY = 0.5
MUTATION_COORDINATES = 3.0


# ====================================================
# Configuración
# ====================================================
@dataclass(frozen=True)
class MoeaConfig:
    population_size: int = 200
    max_iterations: int = 1000
    crossover_rate: float = 0.2
    mutation_rate: float = 0.8
    seed: int = 2024
    penalty_weight: float = 1e4
    step_cap: float = DEFAULT_STEP_CAP
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        if self.population_size < 4:
            raise ParameterError(f"population_size debe ser ≥ 4 (vale {self.population_size})")
        if self.max_iterations < 0:
            raise ParameterError("max_iterations debe ser ≥ 0")
        for name in ("crossover_rate", "mutation_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParameterError(f"{name} debe estar en [0, 1] (vale {value})")
        if self.penalty_weight <= 0:
            raise ParameterError("penalty_weight debe ser > 0")

    @classmethod
    def from_settings(cls, **overrides) -> "MoeaConfig":
        conf = getattr(settings, "HOMEFLEX", {})
        values = {
            "population_size": int(conf.get("POPULATION_SIZE", cls.population_size)),
            "max_iterations": int(conf.get("MAX_ITERATIONS", cls.max_iterations)),
            "crossover_rate": float(conf.get("CROSSOVER_RATE", cls.crossover_rate)),
            "mutation_rate": float(conf.get("MUTATION_RATE", cls.mutation_rate)),
            "seed": int(conf.get("SEED", cls.seed)),
            "penalty_weight": float(conf.get("PENALTY_WEIGHT", cls.penalty_weight)),
            "step_cap": float(conf.get("STEP_CAP", cls.step_cap)),
            "tolerance": float(conf.get("FEASIBILITY_TOLERANCE", cls.tolerance)),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @property
    def crossover_pairs(self) -> int:
        return math.ceil(self.crossover_rate * self.population_size)

    @property
    def mutants(self) -> int:
        return math.ceil(self.mutation_rate * self.population_size)

    @property
    def offspring_per_generation(self) -> int:
        return 2 * self.crossover_pairs + self.mutants

    @property
    def evaluation_budget(self) -> int:
        """Evaluaciones de la corrida propuesta: población + reserva + descendencia."""
        return 3 * self.population_size + self.max_iterations * self.offspring_per_generation


# ====================================================
# Cromosomas y población
# ====================================================
@dataclass
class Chromosome:
    starts: Tuple[int, ...]
    eta: np.ndarray
    objectives: Optional[ObjectiveValues] = None
    origin: str = "init"

    def deviation_controls(self, problem: HorizonProblem) -> np.ndarray:
        return reconstruct_controls(problem.basis, self.eta, problem.scenario.flexible_count)


@dataclass
class Population:
    members: List[Chromosome]
    reserve: List[Chromosome] = field(default_factory=list)
    iteration: int = 0

    def values(self) -> np.ndarray:
        return np.array([c.objectives.pair for c in self.members], dtype=float).reshape(-1, 2)


def initialize(problem: HorizonProblem, config: MoeaConfig, rng) -> Population:
    """Población inicial y reserva H̄ (puntos sesgados a vértices)."""
    fset = problem.fset
    origin = initial_point(fset, step_cap=config.step_cap)
    members = []
    for n in range(config.population_size):
        stream = rng.child("init", n)
        coords = coordinate_subset(fset, stream, INIT_COORDINATE_PROBABILITY)
        eta = sampler_one(fset, origin, coords, n, stream, config.step_cap)
        members.append(Chromosome(problem.sample_starts(stream), eta, origin="init"))

    candidates = []
    for n in range(2 * config.population_size):
        stream = rng.child("reserve", n)
        coords = coordinate_subset(fset, stream, INIT_COORDINATE_PROBABILITY)
        eta = sampler_one(fset, origin, coords, 0, stream, config.step_cap)
        candidates.append(Chromosome(problem.sample_starts(stream), eta, origin="reserve"))

    for chromosome in members + candidates:
        problem.evaluate(chromosome)
    spread = crowding_distance([c.objectives.pair for c in candidates])
    keep = np.argsort(-spread, kind="stable")[: config.population_size]
    reserve = [candidates[i] for i in sorted(keep)]
    return Population(members=members, reserve=reserve, iteration=0)


def crossover(pop: Population, problem: HorizonProblem, rng) -> Tuple[Chromosome, Chromosome]:
    """Combinación convexa de un miembro con un miembro o elemento de la reserva."""
    parent = pop.members[rng.index(len(pop.members))]
    pool = pop.members + pop.reserve
    partner = pool[rng.index(len(pool))]
    weight = float(rng.uniform())
    first = weight * parent.eta + (1.0 - weight) * partner.eta
    second = (1.0 - weight) * parent.eta + weight * partner.eta
    return (
        Chromosome(problem.sample_starts(rng), first, origin="crossover"),
        Chromosome(problem.sample_starts(rng), second, origin="crossover"),
    )


def mutate(pop: Population, problem: HorizonProblem, rng, iteration: int, config: MoeaConfig) -> Chromosome:
    """Mantiene los arranques y mueve η con uno de los dos muestreadores (½ cada uno)."""
    parent = pop.members[rng.index(len(pop.members))]
    fset = problem.fset
    if rng.coin(0.5):
        coords = coordinate_subset(fset, rng, min(1.0, MUTATION_COORDINATES / fset.dimension))
        eta = sampler_one(fset, parent.eta, coords, iteration, rng, config.step_cap)
        origin = "mutation-one"
    else:
        eta = sampler_two(fset, parent.eta, rng, config.step_cap)
        origin = "mutation-two"
    return Chromosome(tuple(parent.starts), eta, origin=origin)


@dataclass
class EvolutionResult:
    front: List[Chromosome]
    log: ConvergenceLog
    population: Population
    evaluations: int
    eliminated: int = 0


def _offspring(pop: Population, problem: HorizonProblem, config: MoeaConfig, rng, generation: int):
    children = []
    for k in range(config.crossover_pairs):
        children.extend(crossover(pop, problem, rng.child("gen", generation, "co", k)))
    for k in range(config.mutants):
        children.append(mutate(pop, problem, rng.child("gen", generation, "mu", k), generation, config))
    return children


def evolve(problem: HorizonProblem, config: MoeaConfig, rng, solver: str = "proposed") -> EvolutionResult:
    pop = initialize(problem, config, rng)
    initial = pop.members + pop.reserve
    evaluations = len(initial)

    archive = ParetoArchive()
    archive.update(initial)
    initial_values = np.array([c.objectives.pair for c in initial])
    log = ConvergenceLog(solver, reference=reference_point(initial_values))
    log.record(0, evaluations, archive.values())

    eliminated = 0
    for generation in range(1, config.max_iterations + 1):
        children = []
        for child in _offspring(pop, problem, config, rng, generation):
            report = is_feasible(problem.fset, child.eta)
            if not report:
                eliminated += 1
                logger.warning("Descendiente infactible eliminado (gen %s, fila %s)", generation, report.row_label)
                continue
            problem.evaluate(child)
            children.append(child)
        evaluations += len(children)

        merged = pop.members + children
        values = np.array([c.objectives.pair for c in merged])
        ranks = nondominated_sort(values)
        keep = environmental_selection(ranks, crowding_by_rank(values, ranks), config.population_size)
        pop = Population(members=[merged[i] for i in keep], reserve=pop.reserve, iteration=generation)

        archive.update(children)
        log.record(generation, evaluations, archive.values())

    front_values = archive.values()
    log.finalize(front_values.min(axis=0), front_ranges(initial_values))
    return EvolutionResult(list(archive.members), log, pop, evaluations, eliminated)
