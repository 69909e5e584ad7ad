"""Variable-exponent Lebesgue norms, l^r-extension verdicts and constant estimates."""

from .errors import DomainError, ValidationError
from .spaces import (
    INF,
    Cell,
    CellKind,
    Exponent,
    IntervalIpq,
    SpaceSpec,
    TailSpec,
    conjugate,
    conjugate_space,
    interval_Ipq,
    interval_contains,
    summarize,
    truncate,
)
from .norms import associate_norm, holder_check, luxemburg_norm, modular, vector_norm

__version__ = "0.1.0"
