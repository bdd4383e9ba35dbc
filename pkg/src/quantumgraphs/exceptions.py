"""Exception hierarchy shared across the package."""

from __future__ import annotations


class QuantumGraphError(Exception):
    """Base class for all errors raised by this package."""


class GraphSpecError(QuantumGraphError):
    """Malformed or inconsistent graph / conditions input."""


class DegenerateConditionsError(GraphSpecError):
    """The stacked condition matrix [A B] is rank deficient."""


class ChartError(QuantumGraphError):
    """A subspace falls outside the requested Grassmannian chart."""


class DirichletSingularityError(QuantumGraphError):
    """The classic DtN block is undefined: lambda hits the edge Dirichlet spectrum.

    Carries the offending edge id (when known) and the nearest Dirichlet
    eigenvalue estimate so callers can switch to the dotted or intersection
    backend.
    """

    def __init__(self, message: str, *, edge_id: str | None = None,
                 lam: float | complex | None = None,
                 nearest: float | None = None) -> None:
        super().__init__(message)
        self.edge_id = edge_id
        self.lam = lam
        self.nearest = nearest


class BackendPreconditionError(QuantumGraphError):
    """A backend was asked to operate outside its domain of validity."""

    def __init__(self, message: str, *, hint: str = "") -> None:
        super().__init__(message)
        self.hint = hint


class NotAnEigenvalueError(QuantumGraphError):
    """Eigenfunction data was requested at a point that is not an eigenvalue."""
