# apps/optimizer/pareto.py
"""
Utilidades de frentes de Pareto (minimización de los dos objetivos):
ordenamiento no dominado, distancia de crowding, archivo externo,
hipervolumen 2-D, solución rodilla y bitácora de convergencia.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from apps.common.exceptions import ParameterError

logger = logging.getLogger(__name__)

_RANGE_FLOOR = 1e-9


def _as_values(values) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(-1, 2)


# ====================================================
# Ordenamiento y selección
# ====================================================
def dominance_matrix(values) -> np.ndarray:
    """dom[i, j] = True si i domina a j."""
    v = _as_values(values)
    leq = np.all(v[:, None, :] <= v[None, :, :], axis=2)
    lt = np.any(v[:, None, :] < v[None, :, :], axis=2)
    return leq & lt


def nondominated_sort(values) -> np.ndarray:
    """Rango por elemento; 0 = no dominado."""
    dom = dominance_matrix(values)
    n = dom.shape[0]
    ranks = np.full(n, -1, dtype=int)
    dominated_by = dom.sum(axis=0)
    rank = 0
    current = np.flatnonzero(dominated_by == 0)
    while current.size:
        ranks[current] = rank
        dominated_by = dominated_by - dom[current].sum(axis=0)
        dominated_by[ranks >= 0] = -1
        current = np.flatnonzero(dominated_by == 0)
        rank += 1
    return ranks


def crowding_distance(values) -> np.ndarray:
    v = _as_values(values)
    n = v.shape[0]
    if n < 3:
        return np.full(n, np.inf)
    distance = np.zeros(n)
    for k in range(v.shape[1]):
        order = np.argsort(v[:, k], kind="stable")
        span = v[order[-1], k] - v[order[0], k]
        if span <= 0:
            continue
        distance[order[0]] = distance[order[-1]] = np.inf
        distance[order[1:-1]] += (v[order[2:], k] - v[order[:-2], k]) / span
    return distance


def crowding_by_rank(values, ranks) -> np.ndarray:
    v = _as_values(values)
    crowding = np.zeros(v.shape[0])
    for rank in np.unique(ranks):
        members = np.flatnonzero(ranks == rank)
        crowding[members] = crowding_distance(v[members])
    return crowding


def environmental_selection(ranks, crowding, size: int) -> np.ndarray:
    """Índices de los ``size`` mejores por (rango ascendente, crowding descendente)."""
    order = np.lexsort((-np.asarray(crowding, dtype=float), np.asarray(ranks)))
    return order[:size]


def nondominated_filter(values) -> np.ndarray:
    """Índices no dominados (barrido 2-D); los puntos repetidos se guardan una vez."""
    v = _as_values(values)
    order = np.lexsort((v[:, 1], v[:, 0]))
    keep, best = [], np.inf
    for i in order:
        if v[i, 1] < best:
            keep.append(int(i))
            best = v[i, 1]
    return np.asarray(keep, dtype=int)


# ====================================================
# Métricas
# ====================================================
def reference_point(values) -> np.ndarray:
    v = _as_values(values)
    worst = v.max(axis=0)
    spread = np.maximum(worst - v.min(axis=0), _RANGE_FLOOR)
    return worst + 0.1 * spread


def hypervolume(values, reference) -> float:
    reference = np.asarray(reference, dtype=float)
    v = _as_values(values)
    v = v[np.all(v <= reference, axis=1)]
    if v.size == 0:
        return 0.0
    front = v[nondominated_filter(v)]
    area, ceiling = 0.0, reference[1]
    for cost, dissatisfaction in front:
        area += (reference[0] - cost) * (ceiling - dissatisfaction)
        ceiling = dissatisfaction
    return float(area)


def manhattan_distance(values, ideal, ranges) -> float:
    """min sobre el frente de Σ |v − ideal| / rango."""
    ranges = np.asarray(ranges, dtype=float)
    if np.any(ranges <= 0):
        raise ParameterError(f"Los rangos deben ser > 0 (valen {ranges.tolist()})")
    v = _as_values(values)
    if v.size == 0:
        return float("inf")
    return float(np.min(np.sum(np.abs(v - np.asarray(ideal, dtype=float)) / ranges, axis=1)))


def select_knee(values) -> int:
    """Miembro con menor distancia L1 normalizada a la esquina ideal; empate → menor costo."""
    v = _as_values(values)
    if v.shape[0] == 0:
        raise ParameterError("El frente está vacío")
    low = v.min(axis=0)
    span = v.max(axis=0) - low
    normalized = np.where(span > 0, (v - low) / np.where(span > 0, span, 1.0), 0.0)
    score = normalized.sum(axis=1)
    return int(np.lexsort((v[:, 0], score))[0])


# ====================================================
# Archivo externo y bitácora
# ====================================================
class ParetoArchive:
    """Todos los no dominados vistos en una corrida, ordenados por costo."""

    def __init__(self):
        self.members: List = []

    def update(self, candidates: Sequence) -> None:
        pool = self.members + list(candidates)
        if not pool:
            return
        keep = nondominated_filter([c.objectives.pair for c in pool])
        self.members = [pool[i] for i in keep]

    def values(self) -> np.ndarray:
        return _as_values([c.objectives.pair for c in self.members])

    def __len__(self):
        return len(self.members)


@dataclass
class GenerationRecord:
    generation: int
    evaluations: int
    front: np.ndarray
    hypervolume: float
    manhattan: Optional[float] = None

    @property
    def front_size(self) -> int:
        return int(self.front.shape[0])

    @property
    def ideal(self) -> np.ndarray:
        return self.front.min(axis=0) if self.front_size else np.full(2, np.nan)

    @property
    def nadir(self) -> np.ndarray:
        return self.front.max(axis=0) if self.front_size else np.full(2, np.nan)


CONVERGENCE_COLUMNS = [
    "solver", "slot", "generation", "evaluations", "front_size",
    "ideal_cost", "ideal_dissatisfaction", "nadir_cost", "nadir_dissatisfaction",
    "manhattan", "hypervolume",
]


@dataclass
class ConvergenceLog:
    solver: str
    reference: Optional[np.ndarray] = None
    records: List[GenerationRecord] = field(default_factory=list)

    def record(self, generation: int, evaluations: int, front_values) -> GenerationRecord:
        front = _as_values(front_values).copy()
        hv = hypervolume(front, self.reference) if self.reference is not None else 0.0
        entry = GenerationRecord(generation, evaluations, front, hv)
        self.records.append(entry)
        logger.debug(
            "[%s] gen=%s evals=%s frente=%s hv=%.6g", self.solver, generation, evaluations, entry.front_size, hv
        )
        return entry

    def finalize(self, ideal, ranges) -> None:
        for entry in self.records:
            entry.manhattan = manhattan_distance(entry.front, ideal, ranges)

    def to_rows(self, slot: Optional[int] = None) -> List[Dict]:
        rows = []
        for entry in self.records:
            ideal, nadir = entry.ideal, entry.nadir
            rows.append({
                "solver": self.solver,
                "slot": slot,
                "generation": entry.generation,
                "evaluations": entry.evaluations,
                "front_size": entry.front_size,
                "ideal_cost": ideal[0],
                "ideal_dissatisfaction": ideal[1],
                "nadir_cost": nadir[0],
                "nadir_dissatisfaction": nadir[1],
                "manhattan": entry.manhattan,
                "hypervolume": entry.hypervolume,
            })
        return rows


def manhattan_convergence(log: ConvergenceLog, ideal, ranges) -> List[float]:
    return [manhattan_distance(entry.front, ideal, ranges) for entry in log.records]


def front_ranges(values) -> np.ndarray:
    v = _as_values(values)
    return np.maximum(v.max(axis=0) - v.min(axis=0), _RANGE_FLOOR)
