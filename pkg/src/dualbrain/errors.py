"""Exception types shared across the stack."""


class DualBrainError(Exception):
    """Base class for every error raised by this package."""


class NonFiniteState(DualBrainError):
    pass


class SingularAllocation(DualBrainError):
    pass


class OutOfWindow(DualBrainError):
    """A profile was evaluated outside its 1 s window."""


class SolverNonFinite(DualBrainError):
    pass


class BrakeTimeout(DualBrainError):
    pass


class ParseFailure(DualBrainError):
    """Policy output could not be validated.

    ``span`` holds the offending text so it can be echoed back in a retry prompt.
    """

    def __init__(self, message: str, span: str = ""):
        super().__init__(message)
        self.span = span


class InvalidPlan(DualBrainError):
    pass


class PlannerUnavailable(DualBrainError):
    pass


class SafetyAbort(DualBrainError):
    pass


class StepBudgetExceeded(DualBrainError):
    pass


class ScenarioError(DualBrainError):
    """Scenario file could not be loaded; message carries file and location."""
