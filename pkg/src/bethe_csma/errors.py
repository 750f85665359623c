"""Exception types shared across the package."""


class DomainError(ValueError):
    """A rate vector lies outside (or on the boundary of) the marginal polytope."""


class OracleIntractableError(RuntimeError):
    """Exhaustive enumeration was refused because the graph is too large."""


class InvariantViolation(AssertionError):
    """An internal invariant failed; indicates a bug rather than bad input."""
