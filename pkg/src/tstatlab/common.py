"""Shared markers and exception types."""

from __future__ import annotations


class _Infinite:
    """Explicit marker for a divergent quantity.

    Finiteness is the scientific output of most routines here, so a
    divergent expectation is reported with this singleton rather than
    ``math.inf`` (which can also arise from overflow).
    """

    _instance: _Infinite | None = None

    def __new__(cls) -> _Infinite:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Infinite"

    def __str__(self) -> str:
        return "Infinite"

    def __reduce__(self):
        return (_Infinite, ())


INFINITE = _Infinite()


def is_infinite(value) -> bool:
    return value is INFINITE


class SpecError(ValueError):
    """A distribution or experiment specification violates an invariant."""


class BudgetExceeded(RuntimeError):
    """Exact enumeration would exceed its configured budget."""


class DivergentTarget(ValueError):
    """The requested moment is infinite, so estimating it is meaningless."""
