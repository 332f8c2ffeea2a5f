"""Exception hierarchy and evaluation budgets shared across the package."""

from __future__ import annotations

import os

#: Environment variable overriding the default evaluation-step budget.
BUDGET_ENV_VAR = "RLAB_BUDGET"

DEFAULT_BUDGET = 10_000_000


def step_budget(override: int | None = None) -> int:
    """Return the evaluation-step budget for unbounded searches.

    Precedence: explicit override, then the RLAB_BUDGET environment
    variable, then the built-in default.
    """
    if override is not None:
        return override
    raw = os.environ.get(BUDGET_ENV_VAR)
    if raw is not None:
        try:
            return int(raw)
        except ValueError as exc:
            raise ParseError(f"{BUDGET_ENV_VAR} must be an integer, got {raw!r}") from exc
    return DEFAULT_BUDGET


class RlabError(Exception):
    """Base class for all package errors."""


class ParseError(RlabError):
    """A spec string or config file could not be parsed."""


class PreconditionError(RlabError):
    """An operation was invoked outside its contract."""


class PermUndefined(PreconditionError):
    """A permutation could not be extended to cover a required prefix."""


class TermUndefined(PreconditionError):
    """A series has no term at a required index."""


class InsufficientData(PreconditionError):
    """Too few checkpoints to classify a partial-sum trace."""


class NotIncreasing(PreconditionError):
    """A growth function declared strictly increasing violated that claim."""


class ExhaustedSign(PreconditionError):
    """One sign class ran out during a rearrangement; the series was not
    conditionally convergent as declared."""


class MalformedTrace(PreconditionError):
    """A trace block has the wrong cardinality or member length."""


class NoOracle(PreconditionError):
    """The series lacks the tail oracle required by the operation."""


class LevelMissing(PreconditionError):
    """A requested approximation level is not stored in the Cauchy name."""


class BudgetError(RlabError):
    """Base class for budget exhaustion."""


class SearchBudgetExceeded(BudgetError):
    """An unbounded search (permutation extension, inverse lookup) hit the
    evaluation-step budget."""


class BudgetExceeded(BudgetError):
    """An enumeration (prefix-space sweep) exceeded its budget."""
