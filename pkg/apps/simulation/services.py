# apps/simulation/services.py
"""
Simulación receding-horizon de un día y experimentos de comparación.

En cada slot: pronóstico → conjunto factible desde el estado real →
solver → rodilla → se aplica solo u(t) → dinámica y costo REALES.
"""
import dataclasses
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from apps.common.exceptions import HomeFlexError, ParameterError, SimulationAborted
from apps.common.streams import RandomStream
from apps.control.laguerre import LaguerreSettings
from apps.household.power import step_battery
from apps.optimizer.moea import MoeaConfig
from apps.optimizer.objectives import energy_cost
from apps.optimizer.pareto import front_ranges, manhattan_convergence
from apps.optimizer.problem import HorizonProblem, effective_horizon
from apps.optimizer.services import SolverService

from .forecast import ErrorProfile, make_forecast

logger = logging.getLogger(__name__)

_CLAMP_TOLERANCE = 1e-9


@dataclass
class SlotRecord:
    slot: int
    price_true: float
    price_forecast_t0: Optional[float]
    renewable: float
    inflexible_load: float
    battery_power: float
    battery_energy: float
    flexible_power: Tuple[float, ...]
    time_flexible_power: Tuple[float, ...]
    p_total: float
    slot_cost: float
    dissatisfaction: float
    fallback: bool = False


@dataclass
class SolveRecord:
    slot: int
    front: np.ndarray
    knee_index: Optional[int]
    log: object


@dataclass
class SimulationTrace:
    solver: str
    seed: int
    profile: str
    slots: List[SlotRecord] = field(default_factory=list)
    solves: List[SolveRecord] = field(default_factory=list)
    committed: Dict[str, int] = field(default_factory=dict)
    evaluations: int = 0
    wall_time: float = 0.0

    @property
    def total_cost(self) -> float:
        return float(sum(r.slot_cost for r in self.slots))

    @property
    def total_dissatisfaction(self) -> float:
        return float(sum(r.dissatisfaction for r in self.slots))

    @property
    def fallback_slots(self) -> List[int]:
        return [r.slot for r in self.slots if r.fallback]

    def summary(self) -> Dict:
        return {
            "solver": self.solver,
            "seed": self.seed,
            "profile": self.profile,
            "total_cost": self.total_cost,
            "total_dissatisfaction": self.total_dissatisfaction,
            "committed_starts": dict(self.committed),
            "fallback_slots": self.fallback_slots,
            "evaluations": self.evaluations,
            "wall_time_s": round(self.wall_time, 3),
        }


def _safe_battery_power(power: float, energy: float, battery, dt: float) -> float:
    """Recorta P_s al intervalo de un paso que mantiene E_s dentro de [E_min, E_max]."""
    rho = battery.leakage_per_slot
    low = max(-battery.max_rate, (battery.capacity_min - rho * energy) / dt)
    high = min(battery.max_rate, (battery.capacity_max - rho * energy) / dt)
    if low > high:
        return float(np.clip(0.0, -battery.max_rate, battery.max_rate))
    return float(np.clip(power, low, high))


def _first_control(candidate, problem: HorizonProblem) -> np.ndarray:
    return candidate.deviation_controls(problem)[:, 0]


def _realize_slot(scenario, t, u, energy, committed, delay_cost, forecast_t0, fallback, solver) -> SlotRecord:
    """Aplica u(t) sobre la dinámica y los precios reales; ``battery_energy`` es E_s tras el paso."""
    bat, dt = scenario.battery, scenario.grid.slot_duration
    battery_power = _safe_battery_power(float(u[0]), energy, bat, dt)
    if abs(battery_power - u[0]) > _CLAMP_TOLERANCE and not fallback:
        logger.warning("[%s] slot %s: P_s recortada de %.6g a %.6g", solver, t, u[0], battery_power)
    flexible, comfort = [], delay_cost
    for k, appliance in enumerate(scenario.power_flexible, start=1):
        if appliance.is_active(t):
            power = float(np.clip(appliance.nominal_power + u[k], appliance.min_power, appliance.max_power))
            comfort += appliance.discomfort_weight * (power - appliance.nominal_power) ** 2
        else:
            power = 0.0
        flexible.append(power)
    shifted = tuple(
        appliance.rated_power if i in committed and appliance.is_running(committed[i], t) else 0.0
        for i, appliance in enumerate(scenario.time_flexible)
    )

    load = float(scenario.load_series()[t - 1])
    renewable = float(scenario.renewable_series()[t - 1])
    price = scenario.tariff.price(t)
    p_total = load + sum(shifted) + sum(flexible) + battery_power - renewable
    return SlotRecord(
        slot=t,
        price_true=price,
        price_forecast_t0=forecast_t0,
        renewable=renewable,
        inflexible_load=load,
        battery_power=battery_power,
        battery_energy=step_battery(energy, battery_power, bat, dt),
        flexible_power=tuple(flexible),
        time_flexible_power=shifted,
        p_total=p_total,
        slot_cost=energy_cost([p_total], [price], scenario.tariff.feed_in_rate, dt),
        dissatisfaction=comfort,
        fallback=fallback,
    )


def run_mpc_day(
    scenario,
    solver: str,
    config: MoeaConfig,
    laguerre: LaguerreSettings,
    profile: ErrorProfile,
    rng: RandomStream,
    forecast_rng: Optional[RandomStream] = None,
) -> SimulationTrace:
    """
    Un día completo. ``forecast_rng`` separa el ruido de pronóstico del
    solver, así varias corridas con la misma semilla ven los mismos pronósticos.
    """
    started = time.perf_counter()
    trace = SimulationTrace(solver=solver, seed=config.seed, profile=profile.name)
    bat, dt = scenario.battery, scenario.grid.slot_duration
    energy, consumed = bat.initial_energy, 0.0
    committed: Dict[int, int] = {}
    first_forecast = None

    for t in scenario.grid.slots():
        horizon = effective_horizon(scenario.grid.slot_count, t, laguerre.horizon)
        try:
            forecast = make_forecast(scenario, t, horizon, profile, (forecast_rng or rng).child("forecast", t))
            problem = HorizonProblem.build(
                scenario, forecast, laguerre, [energy, consumed], t,
                committed=committed, tolerance=config.tolerance, strict=False,
            )
            result = SolverService.run(solver, problem, config, rng.child("solve", t))
        except HomeFlexError as exc:
            raise SimulationAborted(t, exc) from exc
        if first_forecast is None:
            first_forecast = forecast.price.copy()
        trace.evaluations += result.evaluations

        fallback = False
        chosen = result.knee
        if chosen is None:
            chosen, fallback = result.fallback, True
            if chosen is None:
                raise SimulationAborted(t, "el solver no devolvió ningún plan")
            logger.warning("[%s] slot %s: se aplica el plan de menor violación", solver, t)
        trace.solves.append(SolveRecord(t, np.array(result.values()).reshape(-1, 2), result.knee_index, result.log))

        # Compromiso de arranques en α_b
        delay_cost = 0.0
        for i, appliance in enumerate(scenario.time_flexible):
            if i not in committed and t >= appliance.earliest_start:
                committed[i] = int(chosen.starts[i])
                trace.committed[appliance.name] = committed[i]
                delay_cost += appliance.delay_penalty(committed[i])

        # Solo u(t)
        forecast_t0 = float(first_forecast[t - 1]) if t <= len(first_forecast) else None
        record = _realize_slot(
            scenario, t, _first_control(chosen, problem), energy, committed, delay_cost, forecast_t0, fallback, solver,
        )
        energy = record.battery_energy
        consumed += sum(record.flexible_power)
        trace.slots.append(record)

    trace.wall_time = time.perf_counter() - started
    logger.info(
        "[%s] seed=%s perfil=%s costo=%.4f insatisfacción=%.4f",
        solver, config.seed, profile.name, trace.total_cost, trace.total_dissatisfaction,
    )
    return trace


def run_open_loop(
    scenario,
    solver: str,
    config: MoeaConfig,
    laguerre: LaguerreSettings,
    rng: RandomStream,
) -> SimulationTrace:
    """
    Un solo plan en el slot 1 con horizonte de todo el día, ejecutado sin
    replanificar y con información perfecta. Referencia para el horizonte deslizante.
    """
    started = time.perf_counter()
    trace = SimulationTrace(solver=solver, seed=config.seed, profile="open-loop")
    slot_count = scenario.grid.slot_count
    full_day = dataclasses.replace(laguerre, horizon=slot_count)
    x0 = [scenario.battery.initial_energy, 0.0]
    try:
        forecast = make_forecast(scenario, 1, slot_count, ErrorProfile.zero(), rng.child("forecast", 1))
        problem = HorizonProblem.build(scenario, forecast, full_day, x0, 1, tolerance=config.tolerance)
        result = SolverService.run(solver, problem, config, rng.child("solve", 1))
    except HomeFlexError as exc:
        raise SimulationAborted(1, exc) from exc
    chosen, fallback = result.knee, False
    if chosen is None:
        chosen, fallback = result.fallback, True
        if chosen is None:
            raise SimulationAborted(1, "el solver no devolvió ningún plan")
    trace.evaluations = result.evaluations
    trace.solves.append(SolveRecord(1, np.array(result.values()).reshape(-1, 2), result.knee_index, result.log))

    committed = {i: int(start) for i, start in enumerate(chosen.starts)}
    trace.committed = {a.name: committed[i] for i, a in enumerate(scenario.time_flexible)}
    controls = chosen.deviation_controls(problem)
    energy = scenario.battery.initial_energy
    for t in scenario.grid.slots():
        delay_cost = 0.0
        if t == 1:
            delay_cost = sum(a.delay_penalty(committed[i]) for i, a in enumerate(scenario.time_flexible))
        record = _realize_slot(
            scenario, t, controls[:, t - 1], energy, committed, delay_cost,
            float(forecast.price[t - 1]), fallback, solver,
        )
        energy = record.battery_energy
        trace.slots.append(record)

    trace.wall_time = time.perf_counter() - started
    logger.info("[%s] lazo abierto: costo=%.4f insatisfacción=%.4f", solver, trace.total_cost, trace.total_dissatisfaction)
    return trace


# ====================================================
# Métricas de comparación
# ====================================================
def degradation_metric(trace_with_errors: SimulationTrace, trace_perfect: SimulationTrace) -> float:
    """100·(c_err − c_perf)/c_perf."""
    perfect = trace_perfect.total_cost
    if perfect == 0:
        raise ParameterError("El costo sin errores es 0; la degradación no está definida")
    return 100.0 * (trace_with_errors.total_cost - perfect) / perfect


def shared_reference(logs) -> Tuple[np.ndarray, np.ndarray]:
    """Ideal y rangos a partir de la unión de los frentes finales de varios solvers."""
    finals = [log.records[-1].front for log in logs if log.records and log.records[-1].front_size]
    if not finals:
        raise ParameterError("Ningún solver produjo un frente factible")
    union = np.vstack(finals)
    return union.min(axis=0), front_ranges(union)


def convergence_series(logs) -> Dict[str, List[float]]:
    ideal, ranges = shared_reference(logs)
    return {log.solver: manhattan_convergence(log, ideal, ranges) for log in logs}


# ====================================================
# Experimento de comparación por semillas
# ====================================================
@dataclass(frozen=True)
class RunJob:
    scenario: object
    solver: str
    seed: int
    config: MoeaConfig
    laguerre: LaguerreSettings
    profile: ErrorProfile
    command: str = "simulate"


def execute_job(job: RunJob) -> SimulationTrace:
    config = dataclasses.replace(job.config, seed=job.seed)
    base = RandomStream(job.seed).child(job.command)
    return run_mpc_day(
        job.scenario, job.solver, config, job.laguerre, job.profile,
        base.child(job.solver), forecast_rng=base.child("forecast"),
    )


@dataclass
class ComparisonReport:
    traces: List[SimulationTrace]
    degradation: Dict[Tuple[str, int], float] = field(default_factory=dict)

    def trace(self, solver: str, seed: int, profile: str) -> SimulationTrace:
        for item in self.traces:
            if (item.solver, item.seed, item.profile) == (solver, seed, profile):
                return item
        raise KeyError((solver, seed, profile))

    def averages(self) -> Dict[str, Dict[str, float]]:
        table: Dict[str, Dict[str, float]] = {}
        for solver in sorted({t.solver for t in self.traces}):
            for profile in sorted({t.profile for t in self.traces}):
                runs = [t for t in self.traces if t.solver == solver and t.profile == profile]
                if not runs:
                    continue
                entry = table.setdefault(solver, {})
                entry[f"{profile}_cost"] = float(np.mean([t.total_cost for t in runs]))
                entry[f"{profile}_dissatisfaction"] = float(np.mean([t.total_dissatisfaction for t in runs]))
            values = [v for (s, _), v in self.degradation.items() if s == solver]
            if values:
                table[solver]["degradation_pct"] = float(np.mean(values))
        return table


def compare_solvers(
    scenario,
    solvers: Sequence[str],
    seeds: Sequence[int],
    config: MoeaConfig,
    laguerre: LaguerreSettings,
    error_profile: Optional[ErrorProfile] = None,
    workers: int = 1,
    command: str = "simulate",
) -> ComparisonReport:
    profiles = [ErrorProfile.zero()] + ([error_profile] if error_profile is not None else [])
    jobs = [
        RunJob(scenario, solver, int(seed), config, laguerre, profile, command)
        for solver in solvers for seed in seeds for profile in profiles
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(execute_job, jobs))
    else:
        traces = [execute_job(job) for job in jobs]

    report = ComparisonReport(traces)
    if error_profile is not None:
        for solver in solvers:
            for seed in seeds:
                report.degradation[(solver, int(seed))] = degradation_metric(
                    report.trace(solver, int(seed), error_profile.name),
                    report.trace(solver, int(seed), ErrorProfile.zero().name),
                )
    return report
