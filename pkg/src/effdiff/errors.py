"""Exception types raised by the toolkit."""


class EffDiffError(Exception):
    """Base class for all toolkit errors."""

    _fields = ()

    def __reduce__(self):
        # rebuild from constructor arguments so errors survive worker processes
        if not self._fields:
            return super().__reduce__()
        return type(self), tuple(getattr(self, f) for f in self._fields)


class ConvergenceError(EffDiffError):
    """Iterative solver did not reach its tolerance.

    Carries the achieved relative residual, the iteration count and, for
    time-stepping, the index of the failing step.
    """

    _fields = ("residual", "iterations", "step")

    def __init__(self, residual, iterations, step=None):
        self.residual = residual
        self.iterations = iterations
        self.step = step
        where = f" at time step {step}" if step is not None else ""
        super().__init__(
            f"no convergence{where}: relative residual {residual:.3e} "
            f"after {iterations} iterations"
        )


class SolverInternalError(EffDiffError):
    """Invariant violated inside the solver (non-SPD system, mean drift)."""


class DegenerateGradientError(EffDiffError):
    """Inlet and outlet averages coincide, so the estimator is undefined."""


class MaskFormatError(EffDiffError):
    """Malformed raster file; ``offset`` is the byte position of the fault."""

    _fields = ("message", "offset")

    def __init__(self, message, offset):
        self.message = message
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


class TrialError(EffDiffError):
    """A Monte Carlo trial failed; the campaign is aborted."""

    _fields = ("trial_index", "cause")

    def __init__(self, trial_index, cause):
        self.trial_index = trial_index
        self.cause = cause
        super().__init__(f"trial {trial_index} failed: {cause}")


class ConfigError(EffDiffError):
    """Invalid command-line or config-file parameter."""

    _fields = ("key", "message")

    def __init__(self, key, message):
        self.key = key
        self.message = message
        super().__init__(f"{key}: {message}")
