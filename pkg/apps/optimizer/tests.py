# apps/optimizer/tests.py
import dataclasses
import itertools

import numpy as np
import pytest

from apps.common.exceptions import ParameterError, PreconditionError
from apps.common.streams import RandomStream
from apps.control.constraints import FeasibleSet, is_feasible
from apps.control.laguerre import LaguerreSettings
from apps.optimizer.baselines import (
    RawChromosome,
    constraint_dominance_ranks,
    raw_bounds,
    solve_constraint_dominated,
    solve_penalty,
    violation_measure,
)
from apps.optimizer.moea import (
    Chromosome,
    MoeaConfig,
    Population,
    crossover,
    evolve,
    initialize,
    mutate,
)
from apps.optimizer.objectives import (
    ForecastBundle,
    energy_cost,
    evaluate,
    evaluate_controls,
    evaluate_cost,
    evaluate_dissatisfaction,
)
from apps.optimizer.pareto import (
    crowding_distance,
    hypervolume,
    manhattan_convergence,
    manhattan_distance,
    nondominated_filter,
    nondominated_sort,
    select_knee,
)
from apps.optimizer.problem import HorizonProblem, effective_horizon
from apps.optimizer.sampler import (
    coordinate_subset,
    initial_point,
    line_bounds,
    sampler_one,
    sampler_two,
)
from apps.optimizer.services import SolverService


def _truth(scenario, t_now, horizon):
    window = slice(t_now - 1, t_now - 1 + horizon)
    return ForecastBundle(
        price=scenario.price_series()[window],
        renewable=scenario.renewable_series()[window],
        inflexible_load=scenario.load_series()[window],
        t_now=t_now,
    )


def _problem(scenario, t_now=1, order=4, horizon=6, energy=4.0, committed=None, strict=True):
    m = effective_horizon(scenario.grid.slot_count, t_now, horizon)
    return HorizonProblem.build(
        scenario, _truth(scenario, t_now, m), LaguerreSettings(0.8, order, horizon),
        [energy, 0.0], t_now, committed=committed, tolerance=1e-9, strict=strict,
    )


def _box_set(dimension=1, half_width=1.0):
    A = np.vstack([np.eye(dimension), -np.eye(dimension)])
    return FeasibleSet(
        A=A, b=np.full(2 * dimension, half_width),
        row_labels=tuple(f"box({i})" for i in range(2 * dimension)),
        tolerance=1e-9, horizon=1, t_now=1,
        box=np.full(dimension, half_width), active=np.ones(dimension, dtype=bool),
    )


def _small_config(**overrides):
    values = dict(population_size=10, max_iterations=5, seed=7, tolerance=1e-9)
    values.update(overrides)
    return MoeaConfig(**values)


def _brute_force_ranks(values):
    values = [tuple(v) for v in values]
    n = len(values)
    dominators = [
        {j for j in range(n) if all(a <= b for a, b in zip(values[j], values[i])) and values[j] != values[i]}
        for i in range(n)
    ]
    ranks = [-1] * n
    rank = 0
    while -1 in ranks:
        front = [i for i in range(n) if ranks[i] == -1 and all(ranks[j] != -1 for j in dominators[i])]
        for i in front:
            ranks[i] = rank
        rank += 1
    return ranks


# ====================================================
# Objetivos
# ====================================================
def test_energy_cost_switches_to_feed_in():
    assert energy_cost([1.0, -1.0], [10.0, 20.0], 5.0, 1.0) == pytest.approx(5.0)
    assert energy_cost([0.0, 0.0], [10.0, 20.0], 5.0, 1.0) == 0


def test_cost_continuous_at_zero_exchange():
    for p in (-1e-12, 0.0, 1e-12):
        assert abs(energy_cost([p], [10.0], 2.5, 1.0)) < 1e-10


def test_zero_plan_cost_matches_hand_accumulation(reference_home):
    horizon = 8
    forecast = ForecastBundle(
        price=np.full(horizon, 10.0),
        renewable=reference_home.renewable_series()[9:9 + horizon],
        inflexible_load=reference_home.load_series()[9:9 + horizon],
        t_now=10,
    )
    controls = np.zeros((3, horizon))
    expected = 0.0
    for m in range(horizon):
        slot = 10 + m
        load = forecast.inflexible_load[m]
        load += 0.7 if slot in (11, 12) else 0.0
        load += 0.8 if 11 <= slot <= 16 else 0.0
        load += 1.4
        p_total = load - forecast.renewable[m]
        expected += (10.0 if p_total > 0 else 2.5) * p_total
    assert evaluate_cost(reference_home, forecast, controls, (11,), 10) == pytest.approx(expected)


def test_cost_rejects_wrong_shape(reference_home):
    forecast = _truth(reference_home, 1, 4)
    with pytest.raises(ParameterError):
        evaluate_cost(reference_home, forecast, np.zeros((3, 5)), (11,), 1)


def test_charging_never_lowers_cost(reference_home):
    forecast = _truth(reference_home, 1, 6)
    base = np.zeros((3, 6))
    previous = evaluate_cost(reference_home, forecast, base, (11,), 1)
    for power in np.linspace(0.1, 3.0, 10):
        controls = base.copy()
        controls[0, 2] = power
        cost = evaluate_cost(reference_home, forecast, controls, (11,), 1)
        assert cost >= previous - 1e-12
        previous = cost


def test_dissatisfaction_examples(reference_home):
    f_tf, f_pf, total = evaluate_dissatisfaction(reference_home, np.zeros((3, 6)), (14,), 11)
    assert (f_tf, f_pf) == (pytest.approx(0.027), 0.0)
    assert total == pytest.approx(0.027)

    controls = np.zeros((3, 6))
    controls[1] = -0.2
    f_tf, f_pf, _ = evaluate_dissatisfaction(reference_home, controls, (11,), 11)
    assert f_tf == 0
    assert f_pf == pytest.approx(0.24)


def test_dissatisfaction_ignores_inactive_slots(reference_home):
    controls = np.zeros((3, 6))
    controls[1] = -0.5
    assert evaluate_dissatisfaction(reference_home, controls, (11,), 1)[1] == 0


def test_evaluate_zero_plan_and_separability(reference_home):
    problem = _problem(reference_home)
    zero = Chromosome((11,), np.zeros(problem.dimension))
    values = evaluate(zero, reference_home, problem.forecast, problem.basis, 1)
    assert values.dissatisfaction == 0

    rng = np.random.default_rng(2)
    eta = rng.uniform(-1, 1, problem.dimension) * problem.fset.box * 0.1
    a = evaluate(Chromosome((11,), eta), reference_home, problem.forecast, problem.basis, 1)
    b = evaluate(Chromosome((14,), eta), reference_home, problem.forecast, problem.basis, 1)
    assert a.power_flexible == b.power_flexible
    assert a.time_flexible != b.time_flexible
    again = evaluate(Chromosome((11,), eta), reference_home, problem.forecast, problem.basis, 1)
    assert again == a


# ====================================================
# Muestreadores
# ====================================================
def test_line_bounds_on_box():
    fset = _box_set()
    bounds = line_bounds(fset, [0.0], [1.0])
    assert (bounds.d_pos, bounds.d_neg) == (1.0, 1.0)
    bounds = line_bounds(fset, [0.5], [1.0])
    assert (bounds.d_pos, bounds.d_neg) == (pytest.approx(0.5), pytest.approx(1.5))


def test_line_bounds_requires_feasible_point():
    with pytest.raises(PreconditionError):
        line_bounds(_box_set(), [2.0], [1.0])


def test_line_bounds_lands_on_boundary():
    rng = np.random.default_rng(4)
    for _ in range(200):
        n = 4
        A = np.vstack([rng.normal(size=(8, n)), np.eye(n), -np.eye(n)])
        b = np.concatenate([rng.uniform(0.5, 2.0, 8), np.full(2 * n, 3.0)])
        fset = FeasibleSet(A, b, tuple(str(i) for i in range(len(b))), 1e-9, 1, 1,
                           np.full(n, 3.0), np.ones(n, dtype=bool))
        direction = rng.normal(size=n)
        bounds = line_bounds(fset, np.zeros(n), direction)
        assert is_feasible(fset, 0.999 * bounds.d_pos * direction)
        assert not is_feasible(fset, (1.001 * bounds.d_pos + 1e-6) * direction)
        assert np.min(b - A @ (bounds.d_pos * direction)) <= 1e-7


def test_sampler_one_empty_set_and_vertex_jump():
    fset = _box_set()
    rng = RandomStream(1)
    np.testing.assert_array_equal(sampler_one(fset, [0.3], [], 3, rng), [0.3])
    for _ in range(20):
        assert sampler_one(fset, [0.0], [0], 5, rng)[0] in (-1.0, 1.0)


def test_sampler_two_zero_direction_returns_point():
    fset = dataclasses.replace(_box_set(), box=np.zeros(1))
    np.testing.assert_array_equal(sampler_two(fset, [0.0], RandomStream(3)), [0.0])


def test_samplers_keep_feasibility(reference_home):
    problem = _problem(reference_home, t_now=9, order=5, horizon=8)
    fset = problem.fset
    rng = RandomStream(11)
    eta = initial_point(fset)
    for iteration in range(10_000):
        if iteration % 2:
            eta = sampler_two(fset, eta, rng)
        else:
            eta = sampler_one(fset, eta, coordinate_subset(fset, rng, 0.2), iteration, rng)
        assert is_feasible(fset, eta)


def test_sampler_two_covers_box():
    fset = _box_set(2)
    rng = RandomStream(5)
    eta = np.zeros(2)
    seen = []
    for _ in range(5000):
        eta = sampler_two(fset, eta, rng)
        seen.append(eta)
    seen = np.array(seen)
    assert np.all(seen.max(axis=0) >= 0.95)
    assert np.all(seen.min(axis=0) <= -0.95)


def test_samplers_are_deterministic(reference_home):
    fset = _problem(reference_home).fset
    eta = initial_point(fset)
    first = sampler_two(fset, sampler_one(fset, eta, [0, 2], 1, RandomStream(9)), RandomStream(9, 1))
    second = sampler_two(fset, sampler_one(fset, eta, [0, 2], 1, RandomStream(9)), RandomStream(9, 1))
    np.testing.assert_array_equal(first, second)


def test_initial_point_zero_and_diversified(reference_home):
    fset = _problem(reference_home).fset
    assert not initial_point(fset).any()
    assert is_feasible(fset, initial_point(fset, RandomStream(2), diversify_steps=50))


def test_initial_point_recovers_with_charging(reference_home):
    low = dataclasses.replace(reference_home, battery=dataclasses.replace(reference_home.battery, initial_energy=3.0))
    problem = _problem(low, energy=3.0, strict=False)
    eta = initial_point(problem.fset)
    assert eta[0] > 0
    assert is_feasible(problem.fset, eta)


def test_coordinate_subset_never_empty(reference_home):
    fset = _problem(reference_home).fset
    rng = RandomStream(8)
    for _ in range(100):
        chosen = coordinate_subset(fset, rng, 0.0)
        assert len(chosen) == 1 and fset.active[chosen[0]]


# ====================================================
# Ordenamiento, crowding, rodilla
# ====================================================
def test_nondominated_sort_examples():
    assert nondominated_sort([(1, 2), (2, 1), (2, 2)]).tolist() == [0, 0, 1]
    assert nondominated_sort([(1, 1)] * 4).tolist() == [0, 0, 0, 0]


def test_nondominated_sort_matches_bruteforce():
    rng = np.random.default_rng(21)
    for trial in range(100):
        values = rng.integers(0, 30, size=(200, 2)) if trial % 2 else rng.random((200, 2))
        assert nondominated_sort(values).tolist() == _brute_force_ranks(values.tolist())


def test_crowding_distance_examples():
    distance = crowding_distance([(0, 2), (1, 1), (2, 0)])
    assert np.isinf(distance[0]) and np.isinf(distance[2])
    assert distance[1] == pytest.approx(2.0)
    assert np.all(np.isinf(crowding_distance([(0, 1), (1, 0)])))


def test_nondominated_filter_deduplicates():
    keep = nondominated_filter([(1, 2), (1, 2), (2, 1), (3, 3)])
    assert sorted(keep.tolist()) == [0, 2]


def test_select_knee():
    assert select_knee([(5, 5)]) == 0
    front = [(0, 1), (1, 0), (0.2, 0.2)]
    assert select_knee(front) == 2
    scaled = [(c * 37.0, d) for c, d in front]
    assert select_knee(scaled) == 2
    with pytest.raises(ParameterError):
        select_knee([])


def test_select_knee_affine_invariance():
    rng = np.random.default_rng(6)
    values = rng.random((30, 2))
    values = values[nondominated_filter(values)]
    index = select_knee(values)
    assert select_knee(values * [3.0, 1.0] + [10.0, 0.0]) == index


def test_hypervolume_and_manhattan():
    assert hypervolume([(1, -1), (3, -2), (4, -4)], [5, 0]) == pytest.approx(4 + 2 + 2)
    assert manhattan_distance([(400, 7.5)], (399, 7.4), (10, 0.5)) == pytest.approx(0.3)
    assert manhattan_distance([(399, 7.4), (400, 8)], (399, 7.4), (10, 0.5)) == 0
    with pytest.raises(ParameterError):
        manhattan_distance([(1, 1)], (0, 0), (0, 1))


# ====================================================
# Algoritmo evolutivo
# ====================================================
def test_config_validation():
    with pytest.raises(ParameterError):
        MoeaConfig(population_size=3)
    with pytest.raises(ParameterError):
        MoeaConfig(crossover_rate=1.5)
    config = MoeaConfig(population_size=10, max_iterations=4)
    assert (config.crossover_pairs, config.mutants) == (2, 8)
    assert config.evaluation_budget == 30 + 4 * 12


def test_config_from_settings(settings):
    settings.HOMEFLEX = {"POPULATION_SIZE": 12, "SEED": 5}
    config = MoeaConfig.from_settings(max_iterations=3)
    assert (config.population_size, config.seed, config.max_iterations) == (12, 5, 3)


def test_initialize_feasible_and_deterministic(reference_home):
    problem = _problem(reference_home)
    config = _small_config()
    pop = initialize(problem, config, RandomStream(1))
    assert len(pop.members) == 10 and len(pop.reserve) <= 10
    for chromosome in pop.members + pop.reserve:
        assert is_feasible(problem.fset, chromosome.eta)
        assert 11 <= chromosome.starts[0] <= 22
    again = initialize(problem, config, RandomStream(1))
    for a, b in zip(pop.members, again.members):
        np.testing.assert_array_equal(a.eta, b.eta)
        assert a.starts == b.starts


def test_initialize_without_time_flexible(reference_home):
    bare = dataclasses.replace(reference_home, time_flexible=())
    pop = initialize(_problem(bare), _small_config(), RandomStream(1))
    assert all(c.starts == () for c in pop.members)


def test_crossover_offspring_on_segment(reference_home):
    problem = _problem(reference_home)
    pop = initialize(problem, _small_config(), RandomStream(3))
    for k in range(50):
        first, second = crossover(pop, problem, RandomStream(3, k))
        assert is_feasible(problem.fset, first.eta) and is_feasible(problem.fset, second.eta)
        np.testing.assert_allclose(first.eta + second.eta, _pair_sum(pop, first, second), atol=1e-12)


def _pair_sum(pop, first, second):
    # η' + η'' = η + η̄ para algún par (h, h̄) de la población
    total = first.eta + second.eta
    pool = pop.members + pop.reserve
    for a, b in itertools.product(pop.members, pool):
        if np.allclose(a.eta + b.eta, total, atol=1e-12):
            return a.eta + b.eta
    return None


def test_crossover_of_identical_parents(reference_home):
    problem = _problem(reference_home)
    eta = initial_point(problem.fset, RandomStream(1), diversify_steps=5)
    clone = Chromosome((11,), eta)
    pop = Population(members=[clone], reserve=[])
    first, second = crossover(pop, problem, RandomStream(4))
    np.testing.assert_allclose(first.eta, eta)
    np.testing.assert_allclose(second.eta, eta)


def test_mutation_keeps_starts_and_balances_samplers(reference_home):
    problem = _problem(reference_home)
    config = _small_config()
    pop = initialize(problem, config, RandomStream(5))
    origins = []
    for k in range(1000):
        child = mutate(pop, problem, RandomStream(5, k), k, config)
        assert child.starts in {m.starts for m in pop.members}
        assert is_feasible(problem.fset, child.eta)
        origins.append(child.origin)
    assert abs(origins.count("mutation-one") / 1000 - 0.5) <= 0.05


def test_evolve_without_iterations(reference_home):
    problem = _problem(reference_home)
    result = evolve(problem, _small_config(max_iterations=0), RandomStream(2))
    values = np.array([c.objectives.pair for c in result.front])
    assert (nondominated_sort(values) == 0).all()
    assert len(result.log.records) == 1


def test_evolve_is_elitist_and_feasible(reference_home):
    problem = _problem(reference_home, t_now=5)
    result = evolve(problem, _small_config(max_iterations=15), RandomStream(3))
    assert result.eliminated == 0
    for chromosome in result.front + result.population.members:
        assert is_feasible(problem.fset, chromosome.eta)
    hv = [r.hypervolume for r in result.log.records]
    assert all(b >= a - 1e-12 for a, b in zip(hv, hv[1:]))
    manhattan = [r.manhattan for r in result.log.records]
    assert all(b <= a + 1e-12 for a, b in zip(manhattan, manhattan[1:]))
    for previous, current in zip(result.log.records, result.log.records[1:]):
        for point in previous.front:
            assert np.any(np.all(current.front <= point + 1e-12, axis=1))


def test_evolve_is_deterministic(reference_home):
    problem = _problem(reference_home)
    first = evolve(problem, _small_config(), RandomStream(9))
    second = evolve(problem, _small_config(), RandomStream(9))
    assert [c.objectives.pair for c in first.front] == [c.objectives.pair for c in second.front]


def test_manhattan_convergence_non_increasing(reference_home):
    result = evolve(_problem(reference_home), _small_config(max_iterations=10), RandomStream(4))
    ideal = result.log.records[-1].ideal
    series = manhattan_convergence(result.log, ideal, (1.0, 1.0))
    assert series[-1] <= series[0]
    assert all(b <= a + 1e-12 for a, b in zip(series, series[1:]))


# ====================================================
# Baselines
# ====================================================
def _nominal_raw(problem, battery=None):
    scenario = problem.scenario
    horizon = problem.horizon
    mask = np.array([[1.0 if c.is_active(problem.t_now + m) else 0.0 for m in range(horizon)]
                     for c in scenario.power_flexible])
    nominal = np.array([c.nominal_power for c in scenario.power_flexible])[:, None] * mask
    power = np.zeros(horizon) if battery is None else np.asarray(battery, dtype=float)
    return RawChromosome((11,), power, nominal)


def test_violation_examples(reference_home):
    problem = _problem(reference_home)
    raw = _nominal_raw(problem)
    assert violation_measure(raw, reference_home, 1, 4.0) == 0
    spike = _nominal_raw(problem, [4.0, 0, 0, 0, 0, 0])
    assert violation_measure(spike, reference_home, 1, 4.0) == pytest.approx(1.0)


def test_violation_matches_accumulation(reference_home):
    problem = _problem(reference_home, t_now=10)
    rng = np.random.default_rng(12)
    bat = reference_home.battery
    for _ in range(200):
        battery = rng.uniform(-5, 5, problem.horizon)
        flexible = rng.uniform(-0.5, 2.0, (2, problem.horizon))
        raw = RawChromosome((11,), battery, flexible)
        expected, energy = 0.0, 4.0
        for m in range(problem.horizon):
            expected += max(abs(battery[m]) - bat.max_rate, 0.0)
            for k, c in enumerate(reference_home.power_flexible):
                if c.is_active(10 + m):
                    expected += max(flexible[k, m] - c.max_power, 0.0) + max(c.min_power - flexible[k, m], 0.0)
            energy = bat.leakage_per_slot * energy + battery[m]
            expected += max(energy - bat.capacity_max, 0.0) + max(bat.capacity_min - energy, 0.0)
        assert violation_measure(raw, reference_home, 10, 4.0) == pytest.approx(expected)


def test_raw_bounds_mask_inactive(reference_home):
    low, high = raw_bounds(_problem(reference_home))
    assert low.size == 18
    assert not low[6:12].any() and not high[6:12].any()


def test_constraint_dominance_ranks():
    values = [(1, 1), (5, 5), (0, 0), (2, 0.5)]
    violations = [0.0, 0.0, 2.0, 1.0]
    ranks = constraint_dominance_ranks(values, violations)
    assert max(ranks[:2]) < min(ranks[2:])
    assert ranks[3] < ranks[2]
    feasible = np.random.default_rng(3).random((50, 2))
    np.testing.assert_array_equal(constraint_dominance_ranks(feasible, np.zeros(50)), nondominated_sort(feasible))


def test_feasible_raw_objectives_are_plain(reference_home):
    problem = _problem(reference_home)
    raw = _nominal_raw(problem)
    plain = evaluate_controls(reference_home, problem.forecast, raw.deviation_controls(problem), raw.starts, 1)
    assert plain.dissatisfaction == 0


@pytest.mark.parametrize("solve", [solve_penalty, solve_constraint_dominated])
def test_baseline_front_is_feasible_and_deterministic(reference_home, solve):
    problem = _problem(reference_home)
    config = _small_config()
    first = solve(problem, config, RandomStream(6))
    second = solve(problem, config, RandomStream(6))
    assert [c.objectives.pair for c in first.front] == [c.objectives.pair for c in second.front]
    assert all(c.violation <= 1e-6 for c in first.front)
    assert first.fallback is not None
    assert config.evaluation_budget <= first.evaluations < config.evaluation_budget + config.population_size


def test_solver_registry(reference_home):
    assert SolverService.names() == ["cdom", "penalty", "proposed"]
    result = SolverService.run("proposed", _problem(reference_home), _small_config(max_iterations=2), RandomStream(1))
    assert result.knee is result.front[result.knee_index]
    with pytest.raises(ValueError):
        SolverService.run("moead", _problem(reference_home), _small_config(), RandomStream(1))


# ====================================================
# Escala de escritorio (pytest -m slow)
# ====================================================
@pytest.mark.slow
def test_desk_scale_evolve_stays_feasible(reference_home):
    problem = _problem(reference_home, order=8, horizon=10)
    result = evolve(problem, MoeaConfig(population_size=50, max_iterations=200, seed=1), RandomStream(1))
    assert result.eliminated == 0
    for chromosome in result.front + result.population.members + result.population.reserve:
        assert is_feasible(problem.fset, chromosome.eta)
    assert len(result.log.records) == 201
