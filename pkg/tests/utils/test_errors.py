import pytest

from utils.errors import (
    ChartError,
    ConditioningError,
    ConfigError,
    ConvergenceTableError,
    DomainError,
    FlowInstabilityError,
    HarmonicityPreconditionError,
    RigidityError,
)


@pytest.mark.parametrize(
    "error,builtin",
    [
        (DomainError, ValueError),
        (ChartError, DomainError),
        (ConditioningError, ArithmeticError),
        (FlowInstabilityError, FloatingPointError),
        (ConvergenceTableError, ValueError),
        (ConfigError, ValueError),
    ],
)
def test_hierarchy(error, builtin):
    assert issubclass(error, RigidityError)
    assert issubclass(error, builtin)


def test_config_error_names_field():
    error = ConfigError("unknown key", field="flow.dtt")
    assert error.field == "flow.dtt"
    assert str(error) == "flow.dtt: unknown key"
    assert str(ConfigError("bad")) == "bad"


def test_harmonicity_error_carries_values():
    error = HarmonicityPreconditionError(0.25, 1e-6)
    assert (error.sup_tension, error.tolerance) == (0.25, 1e-6)
    assert "2.500e-01" in str(error)
