"""Exception hierarchy shared by the solvers, reductions and the harness."""


class DwromError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(DwromError, ValueError):
    """Invalid model, benchmark or run configuration."""


class SingularMatrixError(DwromError, ArithmeticError):
    """A linear system could not be solved (pivot below threshold)."""


class SimulationAbort(DwromError, RuntimeError):
    """A time integration stopped before reaching its final time.

    ``step`` is the index of the step that failed, ``stage`` an optional
    Runge-Kutta stage id and ``t`` the time reached.
    """

    reason = "simulation abort"

    def __init__(self, message, step=None, stage=None, t=None):
        super().__init__(message)
        self.step = step
        self.stage = stage
        self.t = t


class DryStateError(SimulationAbort):
    reason = "dry state"


class EimInstability(SimulationAbort):
    """Blow-up of a hyper-reduced run (non-finite or exploding coefficients)."""

    reason = "EIM instability"


class FormatError(DwromError, ValueError):
    """Artifact file has the wrong magic bytes or version."""


class IntegrityError(DwromError, ValueError):
    """Artifact file is truncated or internally inconsistent."""
