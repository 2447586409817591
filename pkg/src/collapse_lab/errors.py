"""Failure taxonomy.

Errors deriving from ``EstimationError`` describe per-replication estimation
failures; the replication harness catches them, records the reason, and
excludes the replication from performance summaries. Everything else signals a
misconfiguration or an unusable input and propagates to the caller.
"""


class CollapseLabError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(CollapseLabError, ValueError):
    """An argument violates a documented precondition."""


class PoolExhausted(CollapseLabError):
    """The covariate pool cannot supply the requested study sizes."""


class EstimationError(CollapseLabError):
    """Base class for failures that void a single estimate, not the run."""


class DegenerateResponse(EstimationError):
    """A binary response with only one observed class cannot be fit."""


class SeparationDetected(EstimationError):
    """Logistic coefficients diverged; the likelihood has no finite maximum."""


class RankDeficient(EstimationError):
    """The design matrix does not have full column rank."""


class NoEvents(EstimationError):
    """A survival fit needs at least one event with positive weight."""


class MonotoneLikelihood(EstimationError):
    """Cox coefficients diverged, typically all events in one arm."""


class InvalidPropensity(EstimationError):
    """Propensity scores must lie strictly inside (0, 1)."""


class InfeasibleTarget(EstimationError):
    """Requested balance moments lie outside the sample's convex hull."""


class SolverFailure(EstimationError):
    """An iterative solver exhausted its iteration budget."""


class DegenerateMarginal(EstimationError):
    """A standardized marginal probability landed on 0 or 1 exactly."""


class InsufficientReplications(CollapseLabError):
    """Fewer than two usable replications; nothing to summarize."""
