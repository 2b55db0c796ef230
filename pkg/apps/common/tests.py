import pickle

import numpy as np
import pytest

from apps.common.exceptions import (
    ConstraintViolationError,
    HomeFlexError,
    InfeasibleScenarioError,
    ParameterError,
    SimulationAborted,
    SlotRangeError,
    SolverError,
)
from apps.common.streams import RandomStream


def test_same_keys_same_numbers():
    a = RandomStream(42).child("simulate", "proposed")
    b = RandomStream(42).child("simulate", "proposed")
    np.testing.assert_array_equal(a.random(5), b.random(5))


def test_children_are_independent_of_creation_order():
    root = RandomStream(42)
    first = root.child("x").random(3)
    root.child("y").random(100)
    again = RandomStream(42).child("x").random(3)
    np.testing.assert_array_equal(first, again)


def test_different_keys_differ():
    root = RandomStream(7)
    assert not np.allclose(root.child("a").random(4), root.child("b").random(4))
    assert not np.allclose(root.child(1).random(4), root.child(2).random(4))


def test_integer_is_inclusive():
    stream = RandomStream(3)
    values = {stream.integer(1, 3) for _ in range(200)}
    assert values == {1, 2, 3}
    assert 0 <= stream.index(5) < 5


def test_error_hierarchy():
    assert issubclass(ParameterError, ValueError)
    assert issubclass(SlotRangeError, IndexError)
    assert issubclass(ConstraintViolationError, HomeFlexError)
    assert issubclass(SimulationAborted, SolverError)


def test_simulation_aborted_keeps_slot():
    error = SimulationAborted(12, "sin plan")
    assert error.slot == 12
    assert "12" in str(error)
    with pytest.raises(HomeFlexError):
        raise error


@pytest.mark.parametrize("error", [
    SimulationAborted(7, "sin plan factible"),
    SimulationAborted(3, InfeasibleScenarioError("η = 0 infactible", "energy-lower(2)", -0.01)),
    InfeasibleScenarioError("η = 0 infactible", row_label="energy-lower(1)", slack=-0.5),
    ParameterError("polo fuera de rango"),
])
def test_errors_survive_pickling(error):
    # los errores de los workers se reconstruyen en el proceso principal
    restored = pickle.loads(pickle.dumps(error))
    assert type(restored) is type(error)
    assert str(restored) == str(error)
    for attribute in ("slot", "row_label", "slack"):
        assert getattr(restored, attribute, None) == getattr(error, attribute, None)
    if isinstance(error, SimulationAborted):
        assert str(restored.cause) == str(error.cause)


def test_infeasible_error_message_is_plain():
    error = InfeasibleScenarioError("η = 0 infactible", row_label="rate-upper(0)", slack=-1.0)
    assert str(error) == "η = 0 infactible"
