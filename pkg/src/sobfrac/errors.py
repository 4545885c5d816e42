"""Exception types shared across the package."""


class SobfracError(Exception):
    """Base class for all package errors."""


class DomainError(SobfracError, ValueError):
    """An argument lies outside the documented domain."""


class GridTooCoarseError(DomainError):
    """The sampled-function grid has too few nodes for the requested operator."""


class EvaluationError(SobfracError, RuntimeError):
    """A series or iteration failed to meet its tolerance within budget.

    Carries a partial result so callers can inspect how far the
    evaluation got before giving up.
    """

    def __init__(self, message, partial=None, terms_used=None):
        super().__init__(message)
        self.partial = partial
        self.terms_used = terms_used


class ConstructionError(SobfracError):
    """A quadrature rule could not reach its tolerance at the requested size."""

    def __init__(self, message, achieved_defect=None):
        super().__init__(message)
        self.achieved_defect = achieved_defect


class PropertyFailure(SobfracError):
    """A numerically verified operator bound was violated."""

    def __init__(self, message, clause=None, t=None, mode=None, report=None):
        super().__init__(message)
        self.clause = clause
        self.t = t
        self.mode = mode
        self.report = report


class NonConvergenceError(SobfracError):
    """Picard iteration exhausted its budget without meeting the tolerance."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class RejectedInstanceError(DomainError):
    """A problem instance violates the exponent preconditions of the solver."""


class OptimizationError(SobfracError):
    """The control optimizer hit an unrecoverable inner-solve failure."""


class ConfigError(SobfracError):
    """A run configuration file failed to parse or validate."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
