"""Exception types raised by the library."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class BrokenPhaseError(DomainError):
    """PT-symmetry is broken: |(r/s) sin(theta)| >= 1."""


class SingularMetricError(DomainError):
    """The C operator and CPT metric degenerate as |alpha| -> pi/2."""


class NoSolutionError(DomainError):
    """No evolution time exists for the requested parameters."""
