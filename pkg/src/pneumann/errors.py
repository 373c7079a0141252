"""Exception types shared across the solver modules."""


class PneumannError(Exception):
    """Base class for all solver errors."""


class ValidationError(PneumannError):
    """A parameter or input violates a documented precondition."""


class NonConvergence(PneumannError):
    """An iterative solver exhausted its budget.

    Carries the last residual so callers can report how close the
    iteration got.
    """

    def __init__(self, message, last_residual=None):
        super().__init__(message)
        self.last_residual = last_residual


class MaxIterations(NonConvergence):
    """The outer descent loop hit its iteration cap."""


class ConvergedToConstant(PneumannError):
    """Descent collapsed onto the constant equilibrium.

    Restarting from a different initial profile is advised; the constant
    branch is a separate critical point and not the target solution.
    """

    def __init__(self, message, constant_value=None, level=None):
        super().__init__(message)
        self.constant_value = constant_value
        self.level = level


class NoSignChange(PneumannError):
    """A scan found no sign change of the miss function on the bracket."""


class NoBracket(PneumannError):
    """Ray scaling found no sign change of psi below the search cap."""


class OutOfRange(PneumannError):
    """An ODE trajectory blew past the admissible range."""
