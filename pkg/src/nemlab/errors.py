"""Exception types shared across the package."""


class NemlabError(Exception):
    """Base class for all package errors."""


class DomainError(NemlabError, ValueError):
    """An argument lies outside the domain of an operation."""


class InfeasibleError(NemlabError, ArithmeticError):
    """A q-distribution cannot be normalized (all weights cut off or divergent)."""


class NumericalError(NemlabError, RuntimeError):
    """A numerical procedure failed to reach its accuracy gate."""
