import pickle

import pytest

from effdiff.errors import (ConfigError, ConvergenceError, DegenerateGradientError,
                            MaskFormatError, TrialError)


@pytest.mark.parametrize("exc", [
    ConvergenceError(1e-3, 40, step=2),
    MaskFormatError("bad", 12),
    TrialError(3, ConvergenceError(1e-3, 40)),
    ConfigError("n", "invalid value '-3'"),
    DegenerateGradientError("flat"),
])
def test_errors_pickle(exc):
    back = pickle.loads(pickle.dumps(exc))
    assert type(back) is type(exc) and str(back) == str(exc)


def test_error_messages():
    assert "time step 2" in str(ConvergenceError(1e-3, 40, step=2))
    assert "byte offset 12" in str(MaskFormatError("bad", 12))
    assert str(ConfigError("n", "required")) == "n: required"
