"""True marginal effects under each scenario's target covariate law.

The target law is the untreated covariate distribution in the single-study
design and the trial-2 covariate distribution in the two-trial design. Both
are the same mathematical object: the Normal(0, 1.5) base law reweighted by
one minus the tilt probability. Log odds ratios integrate in closed form
over a fixed quadrature rule; log hazard ratios have no closed form under
censoring, so they come from a large randomized simulation analyzed exactly
like the estimators analyze their data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .fit import DesignSpec, Term, fit_cox
from .links import expit, logit
from .streams import stream
from .synth import (
    BINARY_BASELINE_LOGODDS,
    COV_SD,
    Outcome,
    ScenarioSpec,
    _draw_tte,
    _outcome_lp,
)

QUAD_NODES = 256
MIN_MC_SIZE = 100_000


@dataclass(frozen=True)
class TruthResult:
    value: float
    mc_size: int
    mc_se_hint: float

    def __post_init__(self):
        if self.mc_size < MIN_MC_SIZE:
            raise InvalidArgument(f"mc_size must be at least {MIN_MC_SIZE}")
        if not (self.mc_se_hint >= 0):
            raise InvalidArgument("mc_se_hint must be nonnegative")


def _target_density_nodes(spec: ScenarioSpec):
    """Quadrature nodes and normalized weights for the target covariate law."""
    z, w = np.polynomial.hermite_e.hermegauss(QUAD_NODES)
    l = COV_SD * z
    tilt = expit(-(spec.kappa1 * l + spec.kappa2 * l * l))
    weights = w * tilt
    return l, weights / weights.sum()


def _sample_target_law(spec: ScenarioSpec, size: int, rng: np.random.Generator):
    """Rejection-sample the target covariate law from the Normal base law."""
    out = np.empty(size)
    have = 0
    while have < size:
        batch = max(1000, int((size - have) * 2.2))
        l = rng.normal(0.0, COV_SD, size=batch)
        u = rng.uniform(size=batch)
        keep = l[u < expit(-(spec.kappa1 * l + spec.kappa2 * l * l))]
        take = min(size - have, keep.size)
        out[have : have + take] = keep[:take]
        have += take
    return out


def _risk_pair(spec: ScenarioSpec, l: np.ndarray):
    lp1 = BINARY_BASELINE_LOGODDS + _outcome_lp(
        spec.alpha, spec.beta1, spec.beta2, spec.beta3, 1.0, l
    )
    lp0 = BINARY_BASELINE_LOGODDS + spec.beta1 * l
    return expit(lp1), expit(lp0)


def true_marginal_logor(
    spec: ScenarioSpec,
    mc_size: int = 1_000_000,
    seed: int = 0,
    quadrature: bool = False,
) -> TruthResult:
    """Marginal log odds ratio over the target law.

    With ``quadrature=True`` the integral is evaluated on a fixed rule and
    ``mc_se_hint`` is zero; otherwise the covariate law is Monte Carlo
    sampled and the hint reflects that sampling noise.
    """
    if spec.outcome is not Outcome.BINARY:
        raise InvalidArgument("scenario outcome must be binary")
    if quadrature:
        l, w = _target_density_nodes(spec)
        p1s, p0s = _risk_pair(spec, l)
        p1 = float(np.sum(w * p1s))
        p0 = float(np.sum(w * p0s))
        return TruthResult(logit(p1) - logit(p0), max(mc_size, MIN_MC_SIZE), 0.0)
    if mc_size < MIN_MC_SIZE:
        raise InvalidArgument(f"mc_size must be at least {MIN_MC_SIZE}")
    rng = stream(seed, "truth", spec.label, "binary", mc_size)
    l = _sample_target_law(spec, mc_size, rng)
    p1s, p0s = _risk_pair(spec, l)
    p1, p0 = float(np.mean(p1s)), float(np.mean(p0s))
    se1 = float(np.std(p1s, ddof=1)) / np.sqrt(mc_size) / (p1 * (1.0 - p1))
    se0 = float(np.std(p0s, ddof=1)) / np.sqrt(mc_size) / (p0 * (1.0 - p0))
    hint = float(np.sqrt(se1 * se1 + se0 * se0))
    return TruthResult(logit(p1) - logit(p0), mc_size, hint)


def true_marginal_loghr(
    spec: ScenarioSpec, mc_size: int = 1_000_000, seed: int = 0
) -> TruthResult:
    """Marginal log hazard ratio over the target law.

    Simulates one large 1:1 randomized cohort drawn from the target
    covariate law with the usual recruitment and follow-up pattern, then
    fits the treatment-only proportional hazards model.
    """
    if spec.outcome is not Outcome.TTE:
        raise InvalidArgument("scenario outcome must be time-to-event")
    if mc_size < MIN_MC_SIZE:
        raise InvalidArgument(f"mc_size must be at least {MIN_MC_SIZE}")
    rng = stream(seed, "truth", spec.label, "tte", mc_size)
    l = _sample_target_law(spec, mc_size, rng)
    x = (rng.uniform(size=mc_size) < 0.5).astype(np.int8)
    lp = _outcome_lp(spec.alpha, spec.beta1, spec.beta2, spec.beta3, x, l)
    time, event, _ = _draw_tte(lp, rng)
    f = fit_cox(time, event, DesignSpec((Term.X,)), x, l)
    hint = float(np.sqrt(np.linalg.inv(f.information)[0, 0]))
    return TruthResult(f.coefficients[Term.X], mc_size, hint)


def true_value(
    spec: ScenarioSpec, mc_size: int = 1_000_000, seed: int = 0
) -> TruthResult:
    """Dispatch on outcome kind; binary goes through exact quadrature."""
    if spec.outcome is Outcome.BINARY:
        return true_marginal_logor(spec, mc_size, seed, quadrature=True)
    return true_marginal_loghr(spec, mc_size, seed)
