"""Exception types shared across the package."""


class SchcnError(Exception):
    """Base class for all package errors."""


class InvalidConfig(SchcnError, ValueError):
    """A scenario, sweep or CLI configuration violates its invariants."""


class NonConvergent(SchcnError, ArithmeticError):
    """A numerical routine exhausted its budget before meeting tolerance."""


class NoBracket(SchcnError, ValueError):
    """Root finding was asked to search an interval without a sign change."""


class DegenerateRates(SchcnError, ValueError):
    """Partial-fraction poles coincide, or the relay count is unsupported."""


class GridMismatch(SchcnError, ValueError):
    """Curves being compared are not sampled on the same SNR grid."""
