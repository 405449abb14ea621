"""
src/errors.py
-------------

Exception hierarchy shared by every sub-package.
The CLI maps these onto exit codes (see src/scenarios/cli.py).
"""


class HJSingError(Exception):
    """Base class for all library errors."""


class DomainError(HJSingError, ValueError):
    """Non-finite evaluation of a Hamiltonian, Lagrangian or datum partial."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class IntegrationError(HJSingError):
    """ODE integration failed (step underflow, solver failure)."""

    def __init__(self, message, last_time=None):
        super().__init__(message)
        self.last_time = last_time


class ShootingError(HJSingError):
    """No characteristic root could be found for the requested point."""


class PreconditionError(HJSingError, ValueError):
    """An operation was called outside of its contract."""

    def __init__(self, message, hypothesis=None):
        super().__init__(message)
        self.hypothesis = hypothesis


class GeometricDependenceError(HJSingError, ValueError):
    """The gradients spanning a face are not affinely independent."""


class CflViolation(HJSingError):
    """The explicit grid scheme lost its CFL bound mid-run."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class ConfigError(HJSingError, ValueError):
    """Scenario config could not be parsed or validated."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line
