# apps/simulation/tests.py
import dataclasses
import time

import numpy as np
import pandas as pd
import pytest
import yaml
from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.core.management.base import CommandError

from apps.common.exceptions import ParameterError, SimulationAborted
from apps.common.streams import RandomStream
from apps.control.laguerre import LaguerreSettings
from apps.household.entities import Battery, InflexibleAppliance, Scenario, Tariff, TimeGrid
from apps.optimizer.moea import MoeaConfig
from apps.optimizer.pareto import CONVERGENCE_COLUMNS, nondominated_filter
from apps.optimizer.problem import HorizonProblem
from apps.optimizer.services import SolverService
from apps.simulation.forecast import ErrorBound, ErrorProfile, make_forecast
from apps.simulation.models import SimulationRun
from apps.simulation.outputs import schedule_columns, write_trace
from apps.simulation.services import (
    SimulationTrace,
    SlotRecord,
    _safe_battery_power,
    compare_solvers,
    convergence_series,
    degradation_metric,
    execute_job,
    RunJob,
    run_mpc_day,
    run_open_loop,
)

SMALL = MoeaConfig(population_size=6, max_iterations=2, seed=7)
LAGUERRE = LaguerreSettings(pole=0.8, order=3, horizon=4)
SMALL_FLAGS = ["--pop", "6", "--iters", "2", "--horizon", "4", "--laguerre-order", "3"]


def _day(scenario, solver="proposed", profile=None, seed=7):
    return execute_job(RunJob(scenario, solver, seed, SMALL, LAGUERRE, profile or ErrorProfile.zero()))


def _trace_with_cost(cost, profile="perfect"):
    trace = SimulationTrace(solver="proposed", seed=1, profile=profile)
    trace.slots.append(SlotRecord(
        slot=1, price_true=1.0, price_forecast_t0=1.0, renewable=0.0, inflexible_load=0.0,
        battery_power=0.0, battery_energy=5.0, flexible_power=(), time_flexible_power=(),
        p_total=cost, slot_cost=cost, dissatisfaction=0.0,
    ))
    return trace


@pytest.fixture(scope="module")
def perfect_day(reference_home):
    return _day(reference_home)


def _scenario_file(tmp_path, **changes):
    """Copia del escenario incluido con cambios puntuales (``seccion__campo=valor``)."""
    data = yaml.safe_load(settings.BUNDLED_SCENARIO.read_text(encoding="utf-8"))
    data["series"] = str(settings.BUNDLED_SCENARIO.parent / "reference_home_series.csv")
    for key, value in changes.items():
        section, name = key.split("__")
        if isinstance(data[section], list):
            data[section][0][name] = value
        else:
            data[section][name] = value
    path = tmp_path / "modified.scenario"
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


# ====================================================
# Pronósticos
# ====================================================
def test_zero_profile_returns_truth(reference_home):
    forecast = make_forecast(reference_home, 5, 6, ErrorProfile.zero(), RandomStream(1))
    np.testing.assert_array_equal(forecast.price, reference_home.price_series()[4:10])
    np.testing.assert_array_equal(forecast.renewable, reference_home.renewable_series()[4:10])
    np.testing.assert_array_equal(forecast.inflexible_load, reference_home.load_series()[4:10])


def test_current_slot_is_observed_exactly(reference_home):
    profile = ErrorProfile.default()
    for t in (1, 7, 20):
        forecast = make_forecast(reference_home, t, 4, profile, RandomStream(t))
        assert forecast.price[0] == reference_home.price_series()[t - 1]


def test_forecast_noise_within_envelope(reference_home):
    bound = ErrorBound(0.1, 0.0)
    profile = ErrorProfile(price=bound, name="flat")
    rng = RandomStream(3)
    relative = []
    for t in range(1, 15):
        forecast = make_forecast(reference_home, t, 10, profile, rng.child(t))
        truth = reference_home.price_series()[t - 1:t + 9]
        relative.extend((forecast.price[1:] / truth[1:] - 1.0).tolist())
    relative = np.array(relative)
    assert np.all(np.abs(relative) <= 0.1 + 1e-12)
    assert abs(relative.mean()) < 0.02


def test_error_bound_envelope_grows():
    np.testing.assert_allclose(ErrorBound(0.01, 0.005).envelope(4), [0.0, 0.015, 0.02, 0.025])
    with pytest.raises(ParameterError):
        ErrorBound(-0.1, 0.0)


def test_error_profile_from_file(tmp_path):
    path = tmp_path / "profile.yaml"
    path.write_text("name: rough\nprice: {base_fraction: 0.02, growth_per_step: 0.01}\n", encoding="utf-8")
    profile = ErrorProfile.from_file(path)
    assert profile.name == "rough"
    assert profile.price == ErrorBound(0.02, 0.01)
    assert profile.load.is_zero and not profile.is_zero

    path.write_text("name: perfect\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        ErrorProfile.from_file(path)
    with pytest.raises(ValidationError, match="missing.yaml"):
        ErrorProfile.from_file(tmp_path / "missing.yaml")


# ====================================================
# Horizonte deslizante
# ====================================================
def test_safe_battery_power_keeps_energy_in_bounds(reference_home):
    bat = reference_home.battery
    rho = bat.leakage_per_slot
    # en E_min la fuga obliga a cargar un poco
    power = _safe_battery_power(-3.0, bat.capacity_min, bat, 1.0)
    assert power == pytest.approx((bat.capacity_min - rho * bat.capacity_min))
    # cerca de E_max no se puede cargar a tasa máxima
    power = _safe_battery_power(3.0, 9.5, bat, 1.0)
    assert rho * 9.5 + power == pytest.approx(bat.capacity_max)
    assert _safe_battery_power(1.0, 5.0, bat, 1.0) == 1.0


def test_day_covers_every_slot(reference_home, perfect_day):
    assert [r.slot for r in perfect_day.slots] == list(reference_home.grid.slots())
    assert len(perfect_day.solves) == reference_home.grid.slot_count
    assert perfect_day.profile == "perfect"
    assert perfect_day.evaluations > 0


def test_day_keeps_battery_within_bounds(reference_home, perfect_day):
    bat = reference_home.battery
    for record in perfect_day.slots:
        assert bat.capacity_min - 1e-9 <= record.battery_energy <= bat.capacity_max + 1e-9
        assert abs(record.battery_power) <= bat.max_rate + 1e-9


def test_day_commits_start_once_and_runs_consecutively(reference_home, perfect_day):
    appliance = reference_home.time_flexible[0]
    start = perfect_day.committed[appliance.name]
    assert appliance.earliest_start <= start <= appliance.latest_start
    running = [r.slot for r in perfect_day.slots if r.time_flexible_power[0] > 0]
    assert running == list(range(start, start + appliance.duration))


def test_day_respects_flexible_limits(reference_home, perfect_day):
    for record in perfect_day.slots:
        for appliance, power in zip(reference_home.power_flexible, record.flexible_power):
            if appliance.is_active(record.slot):
                assert appliance.min_power - 1e-12 <= power <= appliance.max_power + 1e-12
            else:
                assert power == 0.0


def test_day_cost_uses_true_prices(reference_home, perfect_day):
    for record in perfect_day.slots:
        assert record.price_true == reference_home.price_series()[record.slot - 1]
        rate = record.price_true if record.p_total >= 0 else reference_home.tariff.feed_in_rate
        assert record.slot_cost == pytest.approx(rate * record.p_total)
    assert perfect_day.total_cost == pytest.approx(sum(r.slot_cost for r in perfect_day.slots))


def test_day_is_deterministic(reference_home, perfect_day):
    again = _day(reference_home)
    assert again.total_cost == perfect_day.total_cost
    assert [r.battery_power for r in again.slots] == [r.battery_power for r in perfect_day.slots]


def test_first_forecast_column(reference_home, perfect_day):
    forecasts = [r.price_forecast_t0 for r in perfect_day.slots]
    assert all(f is not None for f in forecasts[:LAGUERRE.horizon])
    assert all(f is None for f in forecasts[LAGUERRE.horizon:])


def test_baseline_day_completes(reference_home):
    trace = _day(reference_home, solver="penalty")
    assert len(trace.slots) == reference_home.grid.slot_count
    for record in trace.slots:
        assert reference_home.battery.capacity_min - 1e-9 <= record.battery_energy <= reference_home.battery.capacity_max + 1e-9


def test_run_mpc_day_separate_forecast_stream(reference_home):
    profile = ErrorProfile.default()
    forecast_rng = RandomStream(5).child("forecast")
    one = run_mpc_day(reference_home, "proposed", SMALL, LAGUERRE, profile, RandomStream(1), forecast_rng=forecast_rng)
    two = run_mpc_day(reference_home, "proposed", SMALL, LAGUERRE, profile, RandomStream(2), forecast_rng=forecast_rng)
    assert [r.price_forecast_t0 for r in one.slots] == [r.price_forecast_t0 for r in two.slots]


# ====================================================
# Comparación
# ====================================================
def test_degradation_metric():
    assert degradation_metric(_trace_with_cost(10.0), _trace_with_cost(10.0)) == 0.0
    assert degradation_metric(_trace_with_cost(11.0), _trace_with_cost(10.0)) == pytest.approx(10.0)
    with pytest.raises(ParameterError):
        degradation_metric(_trace_with_cost(1.0), _trace_with_cost(0.0))


def test_compare_solvers_reports_degradation(reference_home):
    report = compare_solvers(reference_home, ["proposed"], [3], SMALL, LAGUERRE, error_profile=ErrorProfile.default())
    assert {(t.solver, t.seed, t.profile) for t in report.traces} == {
        ("proposed", 3, "perfect"), ("proposed", 3, "errors"),
    }
    assert set(report.degradation) == {("proposed", 3)}
    averages = report.averages()["proposed"]
    assert {"perfect_cost", "errors_cost", "degradation_pct"} <= set(averages)


def test_compare_solvers_without_errors(reference_home):
    report = compare_solvers(reference_home, ["proposed"], [3, 4], SMALL, LAGUERRE)
    assert len(report.traces) == 2
    assert report.degradation == {}
    with pytest.raises(KeyError):
        report.trace("proposed", 3, "errors")


# ====================================================
# Archivos de salida
# ====================================================
def test_write_trace_schema(reference_home, perfect_day, tmp_path):
    directory = write_trace(perfect_day, reference_home, tmp_path / "run", {"degradation_pct": 0.0})

    schedule = pd.read_csv(directory / "schedule.csv")
    assert list(schedule.columns) == schedule_columns(reference_home)
    assert list(schedule.columns)[-3:] == ["p_total", "slot_cost", "fallback"]
    assert len(schedule) == 24
    assert schedule["price_forecast_t0"].isna().sum() == 24 - LAGUERRE.horizon

    for slot in reference_home.grid.slots():
        pareto = pd.read_csv(directory / f"pareto_{slot}.csv")
        assert list(pareto.columns) == ["cost", "dissatisfaction", "knee"]
        assert pareto["knee"].sum() == 1
        points = pareto[["cost", "dissatisfaction"]].to_numpy()
        assert len(nondominated_filter(points)) == len(points)

    convergence = pd.read_csv(directory / "convergence.csv")
    assert list(convergence.columns) == CONVERGENCE_COLUMNS
    assert set(convergence["slot"]) == set(reference_home.grid.slots())

    summary = yaml.safe_load((directory / "summary.yaml").read_text(encoding="utf-8"))
    assert summary["total_cost"] == pytest.approx(perfect_day.total_cost)
    assert summary["degradation_pct"] == 0.0


def test_write_trace_line_endings(reference_home, perfect_day, tmp_path):
    directory = write_trace(perfect_day, reference_home, tmp_path)
    assert b"\r\n" not in (directory / "schedule.csv").read_bytes()


# ====================================================
# Comandos
# ====================================================
@pytest.mark.django_db
def test_validate_bundled_scenario(capsys):
    call_command("validate")
    out = capsys.readouterr().out
    assert "slot_count: 24" in out
    assert "inflexible: 3" in out and "time_flexible: 1" in out and "power_flexible: 2" in out
    assert "leakage_per_slot" in out


@pytest.mark.django_db
def test_validate_reports_flexible_limits(tmp_path):
    path = _scenario_file(tmp_path, power_flexible__min_power=0.9)
    with pytest.raises(CommandError) as info:
        call_command("validate", "--scenario", str(path))
    assert info.value.returncode == 2
    assert "'c1'" in str(info.value)


@pytest.mark.django_db
def test_validate_reports_feed_in_above_price(tmp_path):
    path = _scenario_file(tmp_path, tariff__feed_in_rate=5.0)
    with pytest.raises(CommandError) as info:
        call_command("validate", "--scenario", str(path))
    assert info.value.returncode == 2
    assert "feed_in_rate" in str(info.value)


@pytest.mark.django_db
def test_missing_series_names_path(tmp_path):
    missing = tmp_path / "nowhere.csv"
    with pytest.raises(CommandError) as info:
        call_command("solve", "--series", str(missing), "--out", str(tmp_path))
    assert info.value.returncode == 2
    assert str(missing) in str(info.value)


@pytest.mark.django_db
def test_invalid_parameters_exit_with_validation_code(tmp_path):
    with pytest.raises(CommandError) as info:
        call_command("solve", "--pop", "2", "--out", str(tmp_path))
    assert info.value.returncode == 2
    with pytest.raises(CommandError) as info:
        call_command("solve", *SMALL_FLAGS, "--slot", "30", "--out", str(tmp_path))
    assert info.value.returncode == 2


@pytest.mark.django_db
def test_solve_writes_front_and_is_reproducible(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        call_command("solve", *SMALL_FLAGS, "--seed", "11", "--out", str(out), "--dump-constraints")

    run = first / "proposed" / "seed_11"
    pareto = pd.read_csv(run / "pareto_1.csv")
    assert len(pareto) >= 1
    points = pareto[["cost", "dissatisfaction"]].to_numpy()
    assert len(nondominated_filter(points)) == len(points)
    for name in ("pareto_1.csv", "convergence.csv", "constraints.csv"):
        assert (run / name).read_bytes() == (second / "proposed" / "seed_11" / name).read_bytes()
    assert pd.read_csv(run / "constraints.csv").columns[0] == "label"

    records = SimulationRun.objects.filter(command="solve", seed=11)
    assert records.count() == 2
    assert all(r.status == "completed" and r.total_cost is not None for r in records)


@pytest.mark.django_db
def test_solve_several_solvers_and_seeds(tmp_path):
    call_command(
        "solve", *SMALL_FLAGS, "--solver", "proposed", "--solver", "cdom",
        "--seed", "1", "--seed", "2", "--slot", "12", "--out", str(tmp_path),
    )
    for solver in ("proposed", "cdom"):
        for seed in (1, 2):
            assert (tmp_path / solver / f"seed_{seed}" / "pareto_12.csv").exists()


@pytest.mark.django_db
def test_simulate_writes_traces_and_summary(tmp_path, capsys):
    call_command("simulate", *SMALL_FLAGS, "--seed", "5", "--out", str(tmp_path))
    for profile in ("perfect", "errors"):
        assert (tmp_path / "proposed" / "seed_5" / profile / "schedule.csv").exists()
    summary = yaml.safe_load((tmp_path / "summary.yaml").read_text(encoding="utf-8"))
    assert len(summary["runs"]) == 2
    assert "proposed/seed_5" in summary["degradation_pct"]
    assert "degradation_pct" in summary["averages"]["proposed"]
    assert SimulationRun.objects.filter(command="simulate", status="completed").count() == 2

    call_command("list_runs")
    assert "simulate:proposed" in capsys.readouterr().out


@pytest.mark.django_db
def test_simulate_without_error_profile(tmp_path):
    call_command("simulate", *SMALL_FLAGS, "--error-profile", "none", "--out", str(tmp_path))
    summary = yaml.safe_load((tmp_path / "summary.yaml").read_text(encoding="utf-8"))
    assert [run["profile"] for run in summary["runs"]] == ["perfect"]
    assert summary["degradation_pct"] == {}


@pytest.mark.django_db
def test_list_runs_empty(capsys):
    call_command("list_runs")
    assert "No hay corridas" in capsys.readouterr().out


@pytest.mark.django_db
def test_simulate_is_byte_identical_across_runs(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        call_command("simulate", *SMALL_FLAGS, "--seed", "5", "--error-profile", "none", "--out", str(out))

    run = first / "proposed" / "seed_5" / "perfect"
    names = sorted(p.name for p in run.glob("*.csv"))
    assert "schedule.csv" in names and "convergence.csv" in names
    assert any(name.startswith("pareto_") for name in names)
    for name in names:
        assert (run / name).read_bytes() == (second / "proposed" / "seed_5" / "perfect" / name).read_bytes()


@pytest.mark.django_db
def test_simulate_abort_exits_with_execution_code(tmp_path, monkeypatch):
    def abort(*args, **kwargs):
        raise SimulationAborted(3, "sin plan")

    monkeypatch.setattr("apps.simulation.management.commands.simulate.compare_solvers", abort)
    with pytest.raises(CommandError) as info:
        call_command("simulate", *SMALL_FLAGS, "--out", str(tmp_path))
    assert info.value.returncode == 3
    assert "slot 3" in str(info.value)


@pytest.mark.django_db
def test_simulation_run_str():
    run = SimulationRun.objects.create(command="simulate", solver="cdom", seed=4)
    label = str(run)
    assert label.startswith("simulate:cdom seed=4 | ")
    assert "—" not in label


# ====================================================
# Experimentos largos (pytest -m slow)
# ====================================================
@pytest.mark.slow
def test_smoke_day_runtime(reference_home):
    config = MoeaConfig(population_size=20, max_iterations=50, seed=1)
    laguerre = LaguerreSettings(pole=0.8, order=6, horizon=8)
    started = time.perf_counter()
    run_mpc_day(reference_home, "proposed", config, laguerre, ErrorProfile.zero(), RandomStream(1))
    assert time.perf_counter() - started < 60


@pytest.mark.slow
def test_battery_follows_price(reference_home):
    config = MoeaConfig(population_size=20, max_iterations=50, seed=1)
    laguerre = LaguerreSettings(pole=0.8, order=6, horizon=8)
    trace = execute_job(RunJob(reference_home, "proposed", 1, config, laguerre, ErrorProfile.zero()))
    prices = [r.price_true for r in trace.slots]
    powers = [r.battery_power for r in trace.slots]
    assert np.corrcoef(prices, powers)[0, 1] < 0
    assert all(3.0 - 1e-9 <= r.battery_energy <= 10.0 + 1e-9 for r in trace.slots)


@pytest.mark.slow
def test_paired_seed_comparison(reference_home):
    config = MoeaConfig(population_size=20, max_iterations=50)
    laguerre = LaguerreSettings(pole=0.8, order=6, horizon=8)
    seeds = [1, 2, 3, 4, 5]
    report = compare_solvers(
        reference_home, ["proposed", "penalty", "cdom"], seeds, config, laguerre,
        error_profile=ErrorProfile.default(), workers=settings.HOMEFLEX["WORKERS"],
    )
    for baseline in ("penalty", "cdom"):
        cheaper = sum(
            report.trace("proposed", s, "perfect").total_cost <= report.trace(baseline, s, "perfect").total_cost
            for s in seeds
        )
        assert cheaper >= 4


def _tiny_home(slots=6):
    """Solo batería: sin electrodomésticos flexibles la rodilla es el plan de menor costo."""
    return Scenario(
        grid=TimeGrid(slot_count=slots),
        inflexible=[InflexibleAppliance("base", 2.0, [(1, slots)])],
        time_flexible=[],
        power_flexible=[],
        battery=Battery(
            leakage_per_slot=0.9 ** (1 / 24), max_rate=3.0, capacity_min=3.0, capacity_max=10.0, initial_energy=4.0,
        ),
        tariff=Tariff([1.0, 1.0, 6.0, 6.0, 1.0, 6.0][:slots], 0.5),
        renewable_true=[0.0] * slots,
        name="tiny",
    )


@pytest.mark.slow
def test_replanning_never_costs_more_than_open_loop():
    home = _tiny_home()
    config = MoeaConfig(population_size=30, max_iterations=80, seed=2)
    laguerre = LaguerreSettings(pole=0.5, order=4, horizon=home.grid.slot_count)
    open_loop = run_open_loop(home, "proposed", config, laguerre, RandomStream(2).child("open"))
    closed = run_mpc_day(home, "proposed", config, laguerre, ErrorProfile.zero(), RandomStream(2).child("closed"))
    assert open_loop.total_dissatisfaction == closed.total_dissatisfaction == 0.0
    assert open_loop.total_cost >= closed.total_cost - 0.02 * abs(closed.total_cost)
    assert all(3.0 - 1e-9 <= r.battery_energy <= 10.0 + 1e-9 for r in open_loop.slots)


def _first_slot_knees(home, seeds, config, laguerre):
    """Rodilla y registro de convergencia del primer slot, mismo presupuesto para cada solver."""
    forecast = make_forecast(home, 1, laguerre.horizon, ErrorProfile.zero(), RandomStream(0))
    problem = HorizonProblem.build(home, forecast, laguerre, [home.battery.initial_energy, 0.0], 1)
    results = {}
    for seed in seeds:
        for solver in ("proposed", "penalty", "cdom"):
            stream = RandomStream(seed).child("solve", solver)
            results[(solver, seed)] = SolverService.run(solver, problem, dataclasses.replace(config, seed=seed), stream)
    return results


@pytest.mark.slow
def test_knee_cost_ordering_at_matching_dissatisfaction(reference_home):
    config = MoeaConfig(population_size=20, max_iterations=50)
    laguerre = LaguerreSettings(pole=0.8, order=6, horizon=8)
    seeds = [1, 2, 3, 4, 5]
    results = _first_slot_knees(reference_home, seeds, config, laguerre)
    for baseline in ("penalty", "cdom"):
        wins = 0
        for seed in seeds:
            ours = results[("proposed", seed)].knee.objectives
            theirs = results[(baseline, seed)].knee.objectives
            close = abs(ours.dissatisfaction - theirs.dissatisfaction) <= 0.05 * abs(theirs.dissatisfaction) + 1e-9
            wins += ours.cost <= theirs.cost and close
        assert wins >= 4, baseline


@pytest.mark.slow
def test_manhattan_convergence_is_monotone_and_lowest(reference_home):
    config = MoeaConfig(population_size=20, max_iterations=50)
    laguerre = LaguerreSettings(pole=0.8, order=6, horizon=8)
    seeds = [1, 2, 3, 4, 5]
    results = _first_slot_knees(reference_home, seeds, config, laguerre)
    wins = {"penalty": 0, "cdom": 0}
    for seed in seeds:
        series = convergence_series([results[(s, seed)].log for s in ("proposed", "penalty", "cdom")])
        ours = series["proposed"]
        assert all(later <= earlier + 1e-12 for earlier, later in zip(ours, ours[1:]))
        for baseline in wins:
            wins[baseline] += ours[-1] <= series[baseline][-1]
    assert all(count >= 4 for count in wins.values()), wins


@pytest.mark.slow
def test_degradation_under_forecast_errors(reference_home):
    config = MoeaConfig(population_size=20, max_iterations=50)
    laguerre = LaguerreSettings(pole=0.8, order=6, horizon=8)
    seeds = [1, 2, 3, 4, 5]
    report = compare_solvers(
        reference_home, ["proposed", "penalty", "cdom"], seeds, config, laguerre,
        error_profile=ErrorProfile.default(), workers=settings.HOMEFLEX["WORKERS"],
    )
    for baseline in ("penalty", "cdom"):
        lower = sum(report.degradation[("proposed", s)] < report.degradation[(baseline, s)] for s in seeds)
        assert lower >= 4, baseline
