class ValidationError(ValueError):
    """Raised for malformed inputs: empty spaces, length mismatches, bad config fields."""


class DomainError(ValueError):
    """Raised when an argument lies outside the mathematical domain of a function."""
