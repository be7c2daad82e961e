"""Exception types shared across the package."""

from __future__ import annotations


class CofcheckError(Exception):
    """Base class for all errors raised by cofcheck."""


class SpecificationError(CofcheckError, ValueError):
    """An object, algorithm, history or schedule description is malformed."""


class UsageError(CofcheckError, ValueError):
    """A well-formed input was used outside an operation's preconditions."""


class InternalError(CofcheckError, RuntimeError):
    """A derived artifact (trace, graph) violates an invariant it must hold."""


class BudgetExceeded(CofcheckError, RuntimeError):
    """State-space exploration hit the configured cap on configurations."""

    def __init__(self, budget: int, explored: int, edges: int = 0) -> None:
        super().__init__(
            f"state budget of {budget} configurations exceeded "
            f"(explored {explored}, edges {edges})"
        )
        self.budget = budget
        self.explored = explored
        self.edges = edges

    @property
    def statistics(self) -> dict[str, int]:
        return {"budget": self.budget, "states": self.explored, "edges": self.edges}
