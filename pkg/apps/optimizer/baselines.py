# apps/optimizer/baselines.py
"""
Solvers de referencia sobre las variables originales (potencias por slot):
NSGA-II con penalización y NSGA-II con dominancia de restricciones.

Los operadores recortan a la caja de cada variable pero no reparan la
dinámica de la batería, por eso pueden producir planes infactibles.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from apps.household.power import simulate_energy

from .objectives import ObjectiveValues, activity_mask, evaluate_controls
from .pareto import (
    ConvergenceLog,
    ParetoArchive,
    crowding_by_rank,
    environmental_selection,
    front_ranges,
    nondominated_sort,
    reference_point,
)
from .problem import HorizonProblem

logger = logging.getLogger(__name__)

FEASIBLE_VIOLATION = 1e-6
CROSSOVER_PROBABILITY = 0.9
MUTATION_SIGMA = 0.05


@dataclass
class RawChromosome:
    starts: Tuple[int, ...]
    battery_power: np.ndarray     # (M,)
    flexible_power: np.ndarray    # (ℓ, M), potencias absolutas
    violation: float = 0.0
    objectives: Optional[ObjectiveValues] = None
    origin: str = "init"

    @property
    def genes(self) -> np.ndarray:
        return np.concatenate([self.battery_power, self.flexible_power.ravel()])

    @classmethod
    def from_genes(cls, starts, genes, flexible_count: int, origin: str) -> "RawChromosome":
        genes = np.asarray(genes, dtype=float)
        horizon = genes.size // (1 + flexible_count)
        return cls(
            starts=tuple(int(s) for s in starts),
            battery_power=genes[:horizon].copy(),
            flexible_power=genes[horizon:].reshape(flexible_count, horizon).copy(),
            origin=origin,
        )

    def deviation_controls(self, problem: HorizonProblem) -> np.ndarray:
        scenario = problem.scenario
        nominal = np.array([c.nominal_power for c in scenario.power_flexible]).reshape(-1, 1)
        mask = activity_mask(scenario, problem.t_now, self.battery_power.size)
        return np.vstack([self.battery_power, (self.flexible_power - nominal) * mask])


def raw_bounds(problem: HorizonProblem) -> Tuple[np.ndarray, np.ndarray]:
    """Caja por gen: batería ±S_max; regulables [min, max] en su ventana, 0 fuera."""
    scenario, horizon = problem.scenario, problem.horizon
    rate = scenario.battery.max_rate
    low, high = [np.full(horizon, -rate)], [np.full(horizon, rate)]
    mask = activity_mask(scenario, problem.t_now, horizon)
    for k, appliance in enumerate(scenario.power_flexible):
        low.append(appliance.min_power * mask[k])
        high.append(appliance.max_power * mask[k])
    return np.concatenate(low), np.concatenate(high)


def violation_measure(raw: RawChromosome, scenario, t_now: int, energy0: float) -> float:
    """Suma de excesos: tasa de batería, potencia de regulables y energía fuera de [E_min, E_max]."""
    bat = scenario.battery
    total = float(np.sum(np.maximum(np.abs(raw.battery_power) - bat.max_rate, 0.0)))
    mask = activity_mask(scenario, t_now, raw.battery_power.size)
    for k, appliance in enumerate(scenario.power_flexible):
        power = raw.flexible_power[k]
        excess = np.maximum(power - appliance.max_power, 0.0) + np.maximum(appliance.min_power - power, 0.0)
        total += float(np.sum(excess * mask[k]))
    energy = simulate_energy(energy0, raw.battery_power, bat.leakage_per_slot, scenario.grid.slot_duration)
    total += float(np.sum(np.maximum(energy - bat.capacity_max, 0.0) + np.maximum(bat.capacity_min - energy, 0.0)))
    return total


def constraint_dominance_ranks(values, violations, tolerance: float = FEASIBLE_VIOLATION) -> np.ndarray:
    """Factibles por Pareto primero; infactibles después, ordenados por violación."""
    values = np.asarray(values, dtype=float).reshape(-1, 2)
    violations = np.asarray(violations, dtype=float)
    ranks = np.zeros(len(violations), dtype=int)
    feasible = violations <= tolerance
    top = 0
    if feasible.any():
        ranks[feasible] = nondominated_sort(values[feasible])
        top = int(ranks[feasible].max()) + 1
    if (~feasible).any():
        levels = np.unique(violations[~feasible], return_inverse=True)[1]
        ranks[~feasible] = top + levels
    return ranks


def penalty_ranking(values, violations, config):
    fitness = np.asarray(values, dtype=float) + config.penalty_weight * np.asarray(violations)[:, None]
    return nondominated_sort(fitness), fitness


def cdom_ranking(values, violations, config):
    return constraint_dominance_ranks(values, violations), np.asarray(values, dtype=float)


@dataclass
class BaselineResult:
    front: List[RawChromosome]
    log: ConvergenceLog
    evaluations: int
    fallback: Optional[RawChromosome] = None


class _Nsga2:
    def __init__(self, problem: HorizonProblem, config, rng, solver: str, ranking: Callable):
        self.problem = problem
        self.config = config
        self.rng = rng
        self.solver = solver
        self.ranking = ranking
        self.low, self.high = raw_bounds(problem)
        self.sigma = MUTATION_SIGMA * (self.high - self.low)
        self.flexible_count = problem.scenario.flexible_count
        self.gene_rate = 1.0 / (self.low.size + len(problem.scenario.time_flexible))
        self.evaluations = 0
        self.fallback: Optional[RawChromosome] = None

    def evaluate(self, raw: RawChromosome) -> RawChromosome:
        problem = self.problem
        raw.violation = violation_measure(raw, problem.scenario, problem.t_now, float(problem.x0[0]))
        raw.objectives = evaluate_controls(
            problem.scenario, problem.forecast, raw.deviation_controls(problem), raw.starts, problem.t_now
        )
        self.evaluations += 1
        if self.fallback is None or raw.violation < self.fallback.violation:
            self.fallback = raw
        return raw

    def random_member(self, stream) -> RawChromosome:
        genes = stream.uniform(self.low, self.high)
        return RawChromosome.from_genes(self.problem.sample_starts(stream), genes, self.flexible_count, "init")

    def rank(self, population):
        values = np.array([c.objectives.pair for c in population])
        violations = np.array([c.violation for c in population])
        ranks, fitness = self.ranking(values, violations, self.config)
        return ranks, crowding_by_rank(fitness, ranks)

    def tournament(self, stream, ranks, crowding) -> int:
        a, b = stream.index(len(ranks)), stream.index(len(ranks))
        if ranks[a] != ranks[b]:
            return a if ranks[a] < ranks[b] else b
        return a if crowding[a] >= crowding[b] else b

    def mutate(self, stream, starts, genes):
        starts = list(starts)
        for i, (low, high) in enumerate(self.problem.start_ranges):
            if stream.coin(self.gene_rate):
                starts[i] = stream.integer(low, high)
        hits = stream.random(genes.size) < self.gene_rate
        noise = stream.generator.normal(0.0, 1.0, genes.size) * self.sigma
        genes = np.clip(np.where(hits, genes + noise, genes), self.low, self.high)
        return starts, genes

    def offspring(self, stream, first: RawChromosome, second: RawChromosome):
        g1, g2 = first.genes, second.genes
        s1, s2 = list(first.starts), list(second.starts)
        if stream.coin(CROSSOVER_PROBABILITY):
            swap = stream.random(g1.size) < 0.5
            g1, g2 = np.where(swap, g2, g1), np.where(swap, g1, g2)
            for i in range(len(s1)):
                if stream.coin(0.5):
                    s1[i], s2[i] = s2[i], s1[i]
        children = []
        for starts, genes in ((s1, g1), (s2, g2)):
            starts, genes = self.mutate(stream, starts, genes)
            children.append(RawChromosome.from_genes(starts, genes, self.flexible_count, "offspring"))
        return children

    def run(self) -> BaselineResult:
        size = self.config.population_size
        population = [self.evaluate(self.random_member(self.rng.child("init", n))) for n in range(size)]
        generations = math.ceil(max(self.config.evaluation_budget - size, 0) / size)

        archive = ParetoArchive()
        archive.update([c for c in population if c.violation <= FEASIBLE_VIOLATION])
        initial_values = np.array([c.objectives.pair for c in population])
        log = ConvergenceLog(self.solver, reference=reference_point(initial_values))
        log.record(0, self.evaluations, archive.values())

        for generation in range(1, generations + 1):
            ranks, crowding = self.rank(population)
            stream = self.rng.child("gen", generation)
            children = []
            while len(children) < size:
                first = population[self.tournament(stream, ranks, crowding)]
                second = population[self.tournament(stream, ranks, crowding)]
                children.extend(self.offspring(stream, first, second))
            children = [self.evaluate(c) for c in children[:size]]

            merged = population + children
            ranks, crowding = self.rank(merged)
            population = [merged[i] for i in environmental_selection(ranks, crowding, size)]
            archive.update([c for c in children if c.violation <= FEASIBLE_VIOLATION])
            log.record(generation, self.evaluations, archive.values())

        ideal = archive.values().min(axis=0) if len(archive) else initial_values.min(axis=0)
        log.finalize(ideal, front_ranges(initial_values))
        if not len(archive):
            logger.warning(
                "[%s] frente factible vacío en el slot %s (violación mínima %.4g)",
                self.solver, self.problem.t_now, self.fallback.violation,
            )
        return BaselineResult(list(archive.members), log, self.evaluations, self.fallback)


def solve_penalty(problem: HorizonProblem, config, rng) -> BaselineResult:
    return _Nsga2(problem, config, rng, "penalty", penalty_ranking).run()


def solve_constraint_dominated(problem: HorizonProblem, config, rng) -> BaselineResult:
    return _Nsga2(problem, config, rng, "cdom", cdom_ranking).run()
