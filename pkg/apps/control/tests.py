# apps/control/tests.py
import dataclasses

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from apps.common.exceptions import InfeasibleScenarioError, ParameterError, SlotRangeError
from apps.control.constraints import (
    build_feasible_set,
    dump_feasible_set,
    is_feasible,
    row_slacks,
)
from apps.control.laguerre import (
    LaguerreSettings,
    StateSpaceModel,
    build_basis,
    build_prediction,
    predict_state,
    predict_trajectory,
    reconstruct_controls,
)
from apps.household.entities import Battery, Scenario, Tariff, TimeGrid
from apps.household.power import simulate_energy


def _operators(scenario, pole=0.8, order=15, horizon=20):
    basis = build_basis(pole, order, horizon)
    return basis, build_prediction(basis, StateSpaceModel.from_scenario(scenario))


def _minimal_scenario(**battery):
    values = dict(leakage_per_slot=1.0, max_rate=2.0, capacity_min=0.0, capacity_max=10.0, initial_energy=5.0)
    values.update(battery)
    return Scenario(
        grid=TimeGrid(slot_count=1),
        inflexible=(),
        time_flexible=(),
        power_flexible=(),
        battery=Battery(**values),
        tariff=Tariff([1.0], 0.5),
        renewable_true=[0.0],
    )


# ====================================================
# Base de Laguerre
# ====================================================
def test_initial_vector():
    basis = build_basis(0.8, 3, 5)
    np.testing.assert_allclose(basis.at(0), [0.6, -0.48, 0.384])


def test_zero_pole_is_unit_delay():
    basis = build_basis(0.0, 2, 4)
    np.testing.assert_allclose(basis.vectors[:, 0], [1, 0, 0, 0])
    np.testing.assert_allclose(basis.vectors[:, 1], [0, 1, 0, 0])


@pytest.mark.parametrize("pole", [0.0, 0.5, 0.8, 0.95])
@pytest.mark.parametrize("order", [1, 5, 15])
@pytest.mark.parametrize("horizon", [20, 200])
def test_recursion_residual(pole, order, horizon):
    basis = build_basis(pole, order, horizon)
    expected0 = np.sqrt(1 - pole**2) * np.array([(-pole) ** j for j in range(order)])
    assert np.max(np.abs(basis.vectors[0] - expected0)) <= 1e-12
    residual = basis.vectors[1:] - basis.vectors[:-1] @ basis.transition.T
    assert np.max(np.abs(residual), initial=0.0) <= 1e-12


def test_truncated_orthonormality():
    basis = build_basis(0.8, 15, 500)
    gram = basis.vectors.T @ basis.vectors
    assert np.max(np.abs(gram - np.eye(15))) <= 1e-6


@pytest.mark.parametrize("pole", [-0.1, 1.0, 1.5])
def test_invalid_pole(pole):
    with pytest.raises(ParameterError):
        build_basis(pole, 3, 5)


def test_basis_is_read_only():
    basis = build_basis(0.8, 3, 5)
    with pytest.raises(ValueError):
        basis.vectors[0, 0] = 1.0
    assert build_basis(0.8, 3, 5) is basis


def test_settings_defaults(settings):
    settings.HOMEFLEX = {"LAGUERRE_POLE": 0.7}
    conf = LaguerreSettings.from_settings(order=4)
    assert (conf.pole, conf.order, conf.horizon) == (0.7, 4, 20)


# ====================================================
# Reconstrucción
# ====================================================
def test_reconstruct_zero():
    basis = build_basis(0.8, 4, 6)
    assert not reconstruct_controls(basis, np.zeros(12), 2).any()


def test_reconstruct_unit_vector():
    basis = build_basis(0.8, 4, 6)
    eta = np.zeros(4)
    eta[0] = 1.0
    np.testing.assert_allclose(reconstruct_controls(basis, eta, 0)[0], basis.vectors[:, 0])


def test_reconstruct_matches_per_slot_products(reference_home):
    basis, ops = _operators(reference_home, order=5, horizon=8)
    rng = np.random.default_rng(3)
    eta = rng.normal(size=15)
    controls = reconstruct_controls(basis, eta, 2)
    for m in range(8):
        np.testing.assert_allclose(controls[:, m], ops.G[m] @ eta, atol=1e-12)


_coefficients = st.lists(st.floats(-10, 10), min_size=15, max_size=15).map(np.array)
_scalars = st.floats(-5, 5)


@hsettings(max_examples=100, deadline=None)
@given(e1=_coefficients, e2=_coefficients, a=_scalars, b=_scalars)
def test_reconstruct_is_linear(e1, e2, a, b):
    basis = build_basis(0.8, 5, 10)
    combined = reconstruct_controls(basis, a * e1 + b * e2, 2)
    separate = a * reconstruct_controls(basis, e1, 2) + b * reconstruct_controls(basis, e2, 2)
    np.testing.assert_allclose(combined, separate, atol=1e-9)


@hsettings(max_examples=100, deadline=None)
@given(
    e1=_coefficients, e2=_coefficients,
    x1=st.tuples(st.floats(0, 10), st.floats(0, 5)), x2=st.tuples(st.floats(0, 10), st.floats(0, 5)),
    alpha=st.floats(0, 1), m=st.integers(0, 10),
)
def test_prediction_is_affine(reference_home, e1, e2, x1, x2, alpha, m):
    _, ops = _operators(reference_home, order=5, horizon=10)
    x1, x2 = np.array(x1), np.array(x2)
    combined = predict_state(ops, alpha * x1 + (1 - alpha) * x2, alpha * e1 + (1 - alpha) * e2, m)
    separate = alpha * predict_state(ops, x1, e1, m) + (1 - alpha) * predict_state(ops, x2, e2, m)
    np.testing.assert_allclose(combined, separate, atol=1e-8)


def test_reconstruct_dimension_mismatch():
    with pytest.raises(ParameterError):
        reconstruct_controls(build_basis(0.8, 5, 10), np.zeros(7), 1)


# ====================================================
# Predicción
# ====================================================
def test_first_step_operator(reference_home):
    basis, ops = _operators(reference_home, order=4, horizon=5)
    model = StateSpaceModel.from_scenario(reference_home)
    np.testing.assert_allclose(ops.phi[1], model.B @ ops.G[0])
    assert not ops.phi[0].any()


def test_cumulative_sum_without_leakage():
    model = StateSpaceModel(leakage=1.0, dt=1.0, flexible_count=0)
    basis = build_basis(0.8, 4, 10)
    ops = build_prediction(basis, model)
    eta = np.array([0.3, -1.0, 0.2, 0.5])
    signal = basis.vectors @ eta
    for m in range(11):
        assert (ops.phi[m] @ eta)[0] == pytest.approx(signal[:m].sum(), abs=1e-12)


def test_prediction_matches_forward_simulation(reference_home):
    model = StateSpaceModel.from_scenario(reference_home)
    basis = build_basis(0.8, 6, 12)
    ops = build_prediction(basis, model)
    rng = np.random.default_rng(17)
    for _ in range(1000):
        x0 = np.array([rng.uniform(3, 10), rng.uniform(0, 5)])
        eta = rng.normal(size=18)
        x = x0.copy()
        trajectory = predict_trajectory(ops, x0, eta)
        for m in range(12):
            x = model.step(x, ops.G[m] @ eta)
            assert np.max(np.abs(predict_state(ops, x0, eta, m + 1) - x)) <= 1e-9
            assert np.max(np.abs(trajectory[m] - x)) <= 1e-9


def test_predict_state_identity_and_leakage(reference_home):
    basis, ops = _operators(reference_home, order=3, horizon=24)
    x0 = np.array([4.0, 0.0])
    np.testing.assert_allclose(predict_state(ops, x0, np.ones(9), 0), x0)
    np.testing.assert_allclose(predict_state(ops, x0, np.zeros(9), 24), [3.6, 0.0], atol=1e-9)
    with pytest.raises(SlotRangeError):
        predict_state(ops, x0, np.zeros(9), 25)


# ====================================================
# Conjunto factible
# ====================================================
def test_reference_origin_feasible(reference_home):
    basis, ops = _operators(reference_home)
    fset = build_feasible_set(reference_home, basis, ops, [4.0, 0.0], 1)
    assert is_feasible(fset, np.zeros(fset.dimension))
    assert len(fset.row_labels) == len(fset.b) == fset.A.shape[0]
    assert fset.A.shape[1] == 45


def test_origin_infeasible_at_capacity_min(reference_home):
    scenario = dataclasses.replace(reference_home, battery=dataclasses.replace(reference_home.battery, initial_energy=3.0))
    basis, ops = _operators(scenario)
    with pytest.raises(InfeasibleScenarioError) as excinfo:
        build_feasible_set(scenario, basis, ops, [3.0, 0.0], 1)
    assert excinfo.value.row_label.startswith("energy-lower(")
    fset = build_feasible_set(scenario, basis, ops, [3.0, 0.0], 1, allow_infeasible_origin=True)
    assert not is_feasible(fset, np.zeros(fset.dimension))


def test_minimal_instance_rows():
    scenario = _minimal_scenario()
    basis, ops = _operators(scenario, pole=0.0, order=1, horizon=1)
    fset = build_feasible_set(scenario, basis, ops, [5.0, 0.0], 1)
    assert fset.row_labels == ("rate-upper(0)", "rate-lower(0)", "energy-upper(1)", "energy-lower(1)")
    np.testing.assert_allclose(fset.A[:, 0], [1.0, -1.0, 1.0, -1.0])
    np.testing.assert_allclose(fset.b, [2.0, 2.0, 5.0, 5.0])

    far = is_feasible(fset, [20.0])
    assert not far and far.row_label == "rate-upper(0)"
    assert is_feasible(fset, [2.0])  # holgura exacta 0
    np.testing.assert_allclose(row_slacks(fset, [0.0]), fset.b)


def _time_domain_ok(scenario, basis, eta, x0, t_now, tol=1e-9):
    controls = reconstruct_controls(basis, eta, scenario.flexible_count)
    bat = scenario.battery
    if np.any(np.abs(controls[0]) > bat.max_rate + tol):
        return False
    for k, appliance in enumerate(scenario.power_flexible, start=1):
        low, high = appliance.deviation_bounds
        for m in range(basis.horizon):
            if appliance.is_active(t_now + m) and not low - tol <= controls[k, m] <= high + tol:
                return False
    energy = simulate_energy(x0[0], controls[0], bat.leakage_per_slot, scenario.grid.slot_duration)
    return bool(np.all(energy >= bat.capacity_min - tol) and np.all(energy <= bat.capacity_max + tol))


@pytest.mark.parametrize("t_now", [1, 9])
def test_equivalence_with_time_domain(reference_home, t_now):
    basis, ops = _operators(reference_home, order=6, horizon=10)
    x0 = np.array([4.0, 0.0])
    fset = build_feasible_set(reference_home, basis, ops, x0, t_now)
    rng = np.random.default_rng(t_now)
    outcomes = set()
    for _ in range(1000):
        eta = rng.uniform(-1, 1, fset.dimension) * fset.box * rng.uniform(0.05, 0.6)
        laguerre = bool(is_feasible(fset, eta))
        assert laguerre == _time_domain_ok(reference_home, basis, eta, x0, t_now)
        outcomes.add(laguerre)
    assert outcomes == {True, False}


def test_convexity_closure(reference_home):
    basis, ops = _operators(reference_home, order=5, horizon=8)
    fset = build_feasible_set(reference_home, basis, ops, [6.0, 0.0], 3)
    rng = np.random.default_rng(1)
    feasible = []
    while len(feasible) < 40:
        eta = rng.uniform(-1, 1, fset.dimension) * fset.box * 0.2
        if is_feasible(fset, eta):
            feasible.append(eta)
    for e1, e2 in zip(feasible[::2], feasible[1::2]):
        for alpha in np.linspace(0, 1, 7):
            assert is_feasible(fset, alpha * e1 + (1 - alpha) * e2)


def test_independent_of_requested_start(reference_home):
    b1 = dataclasses.replace(reference_home.time_flexible[0], requested_start=15)
    shifted = dataclasses.replace(reference_home, time_flexible=(b1,))
    basis, ops = _operators(reference_home, order=4, horizon=10)
    first = build_feasible_set(reference_home, basis, ops, [4.0, 0.0], 5)
    second = build_feasible_set(shifted, basis, ops, [4.0, 0.0], 5)
    np.testing.assert_array_equal(first.A, second.A)
    np.testing.assert_array_equal(first.b, second.b)


def test_inactive_appliance_has_no_rows(reference_home):
    basis, ops = _operators(reference_home, order=4, horizon=5)
    fset = build_feasible_set(reference_home, basis, ops, [4.0, 0.0], 1)
    assert not any("c1" in label for label in fset.row_labels)
    assert not fset.active[4:8].any()
    assert not fset.box[4:8].any()


def test_dump_constraints(reference_home, tmp_path):
    basis, ops = _operators(reference_home, order=3, horizon=2)
    fset = build_feasible_set(reference_home, basis, ops, [4.0, 0.0], 1)
    frame = pd.read_csv(dump_feasible_set(fset, tmp_path / "constraints.csv"))
    assert list(frame.columns) == ["label"] + [f"a{j}" for j in range(9)] + ["b"]
    assert frame["label"].tolist() == list(fset.row_labels)
