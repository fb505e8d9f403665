"""Exception hierarchy.

``DomainError`` covers everything a user can trigger with bad-but-parseable
input (infeasible constraints, mismatched models, malformed files); the CLI
maps it to exit code 1. Anything else escaping to the CLI is an internal
error (exit code 2).
"""


class DomainError(Exception):
    """Base class for user-facing errors."""


class InvalidModelError(DomainError):
    """A model object is structurally broken (bad indices, empty action sets)."""


class PolicyMismatchError(DomainError):
    """Policy is not defined on the model it is applied to."""


class FormatError(DomainError):
    """Malformed input file (JSON schema or HOA text)."""


class InfeasibleError(DomainError):
    """A requested constraint set admits no solution."""


class UnboundedObjectiveError(DomainError):
    """The optimization objective is unbounded and no cap was supplied."""


class EnumerationBudgetError(DomainError):
    """Path enumeration exceeded its node budget before reaching the mass cutoff."""


class SolverError(Exception):
    """The conic backend failed in an unexpected way."""
