"""Exception types shared across the package.

The CLI maps these onto exit codes: usage/config problems -> 1,
numeric integrity violations -> 2, non-convergence -> 3.
"""


class DomainError(ValueError):
    """Input outside the validated domain of a routine."""


class NumericIntegrityError(ArithmeticError):
    """An internal cross-check (dual-route comparison, overflow guard,
    norm conservation, ...) failed beyond its tolerance."""


class NonConvergenceError(RuntimeError):
    """An iterative solver or series failed to converge within its budget."""


class ConfigError(ValueError):
    """Malformed configuration input (CLI flags or config file)."""
