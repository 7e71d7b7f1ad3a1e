"""Exception hierarchy shared across folmi."""


class FolmiError(Exception):
    """Base class for all folmi errors."""


class DimensionError(FolmiError, ValueError):
    """Matrix shapes do not fit together."""


class AsymmetryError(FolmiError, ValueError):
    """A matrix that must be symmetric is not (within tolerance)."""


class ConvergenceError(FolmiError, RuntimeError):
    """An iterative kernel hit its iteration cap."""


class IntervalError(FolmiError, ValueError):
    """Invalid interval data (lower above upper, deltas outside [-1, 1], ...)."""


class MalformedProblemError(FolmiError, ValueError):
    """An LMI problem references unknown variables or has inconsistent sizes."""


class MissingAssignmentError(FolmiError, KeyError):
    """A certificate does not assign every variable of a problem."""


class SynthesisError(FolmiError, RuntimeError):
    """Controller synthesis failed; ``reason`` is a short machine-readable tag."""

    reason = "synthesis failure"


class NoFeasibleIterate(SynthesisError):
    reason = "no feasible iterate"


class RecoveryFailure(SynthesisError):
    reason = "recovery failure"


class PostValidationFailure(SynthesisError):
    reason = "post-validation failure"


class StepFailure(FolmiError, RuntimeError):
    """The implicit step matrix of the simulator is singular."""

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


class SchemaError(FolmiError, ValueError):
    """A system document does not validate; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
