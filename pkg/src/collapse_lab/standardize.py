"""Standardization of conditional fits to marginal effect estimates.

For binary outcomes this is plain averaging of predicted risks over a target
covariate sample on both treatment assignments. For survival outcomes the
conditional Cox fit is first turned into a pair of marginal survival curves
by mixing conditional curves over the target sample, then each curve is
treated as a data-generating law: a large synthetic arm is drawn from it by
inverse transform, censoring mimicking the source study is layered on via a
reverse Kaplan-Meier model, and a treatment-only Cox fit of the two
synthetic arms yields the marginal log hazard ratio.

The synthetic-arm size m controls pure simulation noise; ``adaptive_m``
grows it until two nearby sizes agree, so callers get a size-robust
estimate without always paying for the largest m.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateMarginal, InvalidArgument
from .fit import DesignSpec, FitCox, FitLogistic, Term, fit_cox, linear_predictor
from .links import expit, logit
from .synth import HORIZON, ObsDataset

DEFAULT_M_START = 20_000
DEFAULT_M_CAP = 100_000
DEFAULT_M_TOL = 0.009
PSEUDO_DRAWS = 10_000


class TargetKind(enum.Enum):
    EMPIRICAL_UNTREATED = "empirical-untreated"
    EMPIRICAL_ALL = "empirical-all"
    PSEUDO_NORMAL = "pseudo-normal"


@dataclass
class TargetPopulation:
    """A covariate sample standing in for the standardization target law."""

    kind: TargetKind
    draws: np.ndarray
    mu: float | None = None
    sd: float | None = None

    def __post_init__(self):
        d = np.asarray(self.draws, dtype=float)
        if d.size == 0 or not np.all(np.isfinite(d)):
            raise InvalidArgument("target draws must be nonempty and finite")
        self.draws = d


def untreated_target(data: ObsDataset) -> TargetPopulation:
    draws = data.l[data.x == 0]
    if draws.size == 0:
        raise InvalidArgument("no untreated subjects to standardize over")
    return TargetPopulation(TargetKind.EMPIRICAL_UNTREATED, draws)


def full_cohort_target(data: ObsDataset) -> TargetPopulation:
    return TargetPopulation(TargetKind.EMPIRICAL_ALL, data.l)


def pseudo_normal_target(
    mu: float, sd: float, rng: np.random.Generator, w: int = PSEUDO_DRAWS
) -> TargetPopulation:
    """Normal pseudo-population from reported moments; one shared draw set."""
    if not (sd > 0):
        raise InvalidArgument("sd must be positive")
    if w < 2:
        raise InvalidArgument("w must be at least 2")
    return TargetPopulation(TargetKind.PSEUDO_NORMAL, rng.normal(mu, sd, size=w), mu, sd)


def standardize_binary(fit: FitLogistic, target: TargetPopulation) -> float:
    """Marginal log odds ratio of predicted risks averaged over the target."""
    p1 = float(np.mean(expit(linear_predictor(fit, 1.0, target.draws))))
    p0 = float(np.mean(expit(linear_predictor(fit, 0.0, target.draws))))
    if not (0.0 < p1 < 1.0) or not (0.0 < p0 < 1.0):
        raise DegenerateMarginal("standardized risk hit 0 or 1 exactly")
    return logit(p1) - logit(p0)


@dataclass
class StepCurve:
    """Right-continuous survival step function on the baseline event grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.times.shape != self.values.shape or self.times.size == 0:
            raise InvalidArgument("curve needs matching nonempty times and values")


def _mixture_curve(cumhaz: np.ndarray, risks: np.ndarray, chunk: int = 4000) -> np.ndarray:
    total = np.zeros(cumhaz.shape[0])
    for lo in range(0, risks.size, chunk):
        total += np.exp(-np.outer(cumhaz, risks[lo : lo + chunk])).sum(axis=1)
    return total / risks.size


def marginal_survival_curves(
    fit: FitCox, target: TargetPopulation
) -> tuple[StepCurve, StepCurve]:
    """Mix conditional survival curves over the target for each arm.

    Returns (treated, untreated) curves on the fit's baseline event grid.
    """
    risks1 = np.exp(linear_predictor(fit, 1.0, target.draws))
    risks0 = np.exp(linear_predictor(fit, 0.0, target.draws))
    s1 = _mixture_curve(fit.baseline_cumhaz, risks1)
    s0 = _mixture_curve(fit.baseline_cumhaz, risks0)
    return (
        StepCurve(fit.baseline_times.copy(), s1),
        StepCurve(fit.baseline_times.copy(), s0),
    )


def _first_crossing(values: np.ndarray, u: np.ndarray) -> np.ndarray:
    # index of the first grid point where the step function drops to <= u;
    # values are nonincreasing, so search on their negation
    return np.searchsorted(-values, -u, side="left")


def simulate_marginal_arm(
    curve: StepCurve, m: int, horizon: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw m records from a survival step curve by inverse transform.

    A draw u below the curve's final plateau never crosses the curve and is
    recorded as administratively censored at the horizon.
    """
    if m < 2:
        raise InvalidArgument("m must be at least 2")
    u = rng.uniform(size=m)
    idx = _first_crossing(curve.values, u)
    event = idx < curve.times.size
    time = np.where(event, curve.times[np.minimum(idx, curve.times.size - 1)], horizon)
    return time, event.astype(np.int8)


@dataclass
class ReverseKM:
    """Censoring-time law estimated by the reverse Kaplan-Meier method."""

    times: np.ndarray
    surv: np.ndarray

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.uniform(size=size)
        idx = _first_crossing(self.surv, u)
        hit = idx < self.times.size
        return np.where(hit, self.times[np.minimum(idx, self.times.size - 1)], np.inf)


def censoring_model(time, event, x) -> ReverseKM | None:
    """Reverse Kaplan-Meier fit on pooled arms, or None when not estimable.

    Censoring is only re-imposed when both source arms contain censored
    records; otherwise the synthetic arms keep their administrative
    censoring only.
    """
    time = np.asarray(time, dtype=float)
    event = np.asarray(event)
    x = np.asarray(x)
    cens = event == 0
    if not (np.any(cens & (x == 1)) and np.any(cens & (x == 0))):
        return None
    order = np.argsort(time, kind="stable")
    t, c = time[order], cens[order]
    uniq, first = np.unique(t, return_index=True)
    n_at_risk = t.size - first
    d_cens = np.add.reduceat(c.astype(float), first)
    keep = d_cens > 0
    factors = 1.0 - d_cens[keep] / n_at_risk[keep]
    return ReverseKM(times=uniq[keep], surv=np.cumprod(factors))


class SurvivalStandardizer:
    """Precomputed marginal curves plus censoring law, runnable at any m.

    Splitting construction from simulation lets an adaptive caller rerun
    only the cheap simulation stage while varying m.
    """

    def __init__(self, fit: FitCox, target: TargetPopulation, source: ObsDataset):
        self.curve1, self.curve0 = marginal_survival_curves(fit, target)
        self.censoring = censoring_model(source.time, source.event, source.x)

    def run(self, m: int, rng: np.random.Generator) -> float:
        t1, e1 = simulate_marginal_arm(self.curve1, m, HORIZON, rng)
        t0, e0 = simulate_marginal_arm(self.curve0, m, HORIZON, rng)
        if self.censoring is not None:
            c1 = self.censoring.sample(m, rng)
            c0 = self.censoring.sample(m, rng)
            e1 = np.where(t1 <= c1, e1, 0).astype(np.int8)
            t1 = np.minimum(t1, c1)
            e0 = np.where(t0 <= c0, e0, 0).astype(np.int8)
            t0 = np.minimum(t0, c0)
        time = np.concatenate([t1, t0])
        event = np.concatenate([e1, e0])
        x = np.concatenate([np.ones(m), np.zeros(m)])
        f = fit_cox(time, event, DesignSpec((Term.X,)), x, np.zeros(2 * m))
        return f.coefficients[Term.X]


def standardize_survival(
    fit: FitCox,
    target: TargetPopulation,
    source: ObsDataset,
    m: int,
    rng: np.random.Generator,
) -> float:
    """One-shot marginal log hazard ratio at a fixed synthetic-arm size."""
    return SurvivalStandardizer(fit, target, source).run(m, rng)


@dataclass
class AdaptiveResult:
    value: float
    m_used: int
    capped: bool


def adaptive_m(
    runner: Callable[[int], float],
    start: int = DEFAULT_M_START,
    cap: int = DEFAULT_M_CAP,
    tol: float = DEFAULT_M_TOL,
    growth: float = 1.1,
) -> AdaptiveResult:
    """Grow the simulation size until two nearby sizes agree.

    Evaluates ``runner`` at m and ceil(growth * m); if the two estimates are
    within ``tol`` the m-sized estimate is accepted, otherwise m moves up
    and the larger evaluation is reused. Hitting ``cap`` without agreement
    returns the cap evaluation flagged as capped, with a warning.
    """
    if not (2 <= start <= cap):
        raise InvalidArgument("need 2 <= start <= cap")
    if growth <= 1.0:
        raise InvalidArgument("growth must exceed 1")
    memo: dict[int, float] = {}

    def val(m: int) -> float:
        if m not in memo:
            memo[m] = float(runner(m))
        return memo[m]

    m = int(start)
    while True:
        # the 1e-9 slack keeps products like 1.1 * 22000 from ceiling to
        # 24201 when the exact value is the integer 24200
        m_next = min(math.ceil(growth * m - 1e-9), cap)
        if m_next == m:
            warnings.warn(
                f"adaptive simulation size hit the cap of {cap} without stabilizing",
                RuntimeWarning,
            )
            return AdaptiveResult(val(m), m, True)
        if abs(val(m) - val(m_next)) <= tol:
            return AdaptiveResult(val(m), m, False)
        m = m_next
