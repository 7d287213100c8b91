"""BB84 key distribution under PT-symmetric state-discrimination attacks."""

from ptqkd.errors import (
    BrokenPhaseError,
    DomainError,
    NoSolutionError,
    SingularMetricError,
)

__version__ = "0.1.0"

__all__ = [
    "BrokenPhaseError",
    "DomainError",
    "NoSolutionError",
    "SingularMetricError",
    "__version__",
]
