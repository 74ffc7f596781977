"""Exception types raised across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InputError(ValueError):
    """An input object (density, dataset, file) is malformed."""


class PreconditionError(ValueError):
    """A hypothesis required by the requested bound does not hold."""


class MethodMismatchError(ValueError):
    """The requested accounting method does not apply to the configuration."""


class ConfigError(ValueError):
    """A configuration violates one or more invariants.

    Attributes:
      problems: one human-readable line per violated invariant.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.problems))


class NumericalError(ArithmeticError):
    """A numerical invariant (e.g. mass conservation) was violated."""


class ConsistencyError(RuntimeError):
    """An internal consistency check failed (e.g. a map assumed monotone is not)."""
