"""The five marginal-effect estimators for each study setting.

Single observational study, targeting the covariate law of the untreated:

- A1 unadjusted treatment-only fit
- A2 inverse-odds weighting, linear propensity model
- A3 inverse-odds weighting, quadratic propensity model
- A4 outcome standardization, no treatment-covariate interaction
- A5 outcome standardization with a linear interaction

Anchored two-trial comparison, targeting the trial-2 covariate law; every
estimate is the trial-1 marginal contrast minus the published trial-2
contrast:

- A1 plain anchored difference
- A2 balance weights matching the trial-2 covariate mean
- A3 balance weights matching mean and standard deviation
- A4 outcome regression standardized over a normal pseudo-population
- A5 the same with a linear interaction

Failures coming from the estimation-error taxonomy are captured in the
returned ``Estimate`` rather than raised, so a replication loop can count
and exclude them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EstimationError, InvalidArgument
from .fit import DesignSpec, Term, fit_cox, fit_logistic
from .standardize import (
    SurvivalStandardizer,
    adaptive_m,
    pseudo_normal_target,
    standardize_binary,
    untreated_target,
)
from .synth import AggregateData, ObsDataset, Outcome
from .weights import atu_weights, estimate_propensity, maic_weights_m1, maic_weights_m2

RngFactory = Callable[..., np.random.Generator]


class Setting(enum.Enum):
    SINGLE = "single"
    ITC = "itc"


class MethodCode(enum.Enum):
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"
    A4 = "A4"
    A5 = "A5"


_NAMES = {
    Setting.SINGLE: {
        MethodCode.A1: "unadjusted",
        MethodCode.A2: "weighting-linear",
        MethodCode.A3: "weighting-quadratic",
        MethodCode.A4: "standardization",
        MethodCode.A5: "standardization-interaction",
    },
    Setting.ITC: {
        MethodCode.A1: "anchored-unadjusted",
        MethodCode.A2: "balance-mean",
        MethodCode.A3: "balance-mean-sd",
        MethodCode.A4: "outcome-regression",
        MethodCode.A5: "outcome-regression-interaction",
    },
}


@dataclass(frozen=True)
class MethodId:
    setting: Setting
    code: MethodCode

    @property
    def name(self) -> str:
        return _NAMES[self.setting][self.code]


def single_methods() -> list[MethodId]:
    return [MethodId(Setting.SINGLE, c) for c in MethodCode]


def itc_methods() -> list[MethodId]:
    return [MethodId(Setting.ITC, c) for c in MethodCode]


@dataclass
class Estimate:
    value: float | None
    method: MethodId
    failed: bool = False
    failure_reason: str | None = None
    m_used: int | None = None
    m_capped: bool = False

    def __post_init__(self):
        if self.failed != (self.value is None):
            raise InvalidArgument("failed estimates carry no value, and vice versa")
        if self.failed and not self.failure_reason:
            raise InvalidArgument("failed estimates need a reason")


def _treatment_only(data: ObsDataset, weights=None) -> float:
    if data.outcome_kind is Outcome.BINARY:
        f = fit_logistic(
            data.y, DesignSpec((Term.INTERCEPT, Term.X)), data.x, data.l, weights
        )
        return f.coefficients[Term.X]
    f = fit_cox(
        data.time, data.event, DesignSpec((Term.X,)), data.x, data.l, weights
    )
    return f.coefficients[Term.X]


def _psw_estimate(data: ObsDataset, e: np.ndarray) -> float:
    # shared tail of A2/A3; also the place where constant propensities
    # provably reduce to the unadjusted fit
    return _treatment_only(data, atu_weights(data.x, e).values)


def _outcome_design(data: ObsDataset, interaction: bool) -> DesignSpec:
    terms: tuple[Term, ...]
    if data.outcome_kind is Outcome.BINARY:
        terms = (Term.INTERCEPT, Term.X, Term.L)
    else:
        terms = (Term.X, Term.L)
    if interaction:
        terms = terms + (Term.XL,)
    return DesignSpec(terms)


def _conditional_fit(data: ObsDataset, interaction: bool):
    design = _outcome_design(data, interaction)
    if data.outcome_kind is Outcome.BINARY:
        return fit_logistic(data.y, design, data.x, data.l)
    return fit_cox(data.time, data.event, design, data.x, data.l)


def _standardized_tte(fit, target, source, code: MethodCode, rng_factory: RngFactory):
    std = SurvivalStandardizer(fit, target, source)
    res = adaptive_m(lambda m: std.run(m, rng_factory("std", code.value, m)))
    return res


def _require_factory(rng_factory: RngFactory | None) -> RngFactory:
    if rng_factory is None:
        raise InvalidArgument(
            "this method simulates; pass rng_factory(*path) -> Generator"
        )
    return rng_factory


def estimate_single(
    data: ObsDataset, method: MethodId, rng_factory: RngFactory | None = None
) -> Estimate:
    """Apply one single-study method; failures land in the Estimate."""
    if method.setting is not Setting.SINGLE:
        raise InvalidArgument("method belongs to the two-trial setting")
    code = method.code
    try:
        if code is MethodCode.A1:
            return Estimate(_treatment_only(data), method)
        if code in (MethodCode.A2, MethodCode.A3):
            e = estimate_propensity(data.x, data.l, quadratic=code is MethodCode.A3)
            return Estimate(_psw_estimate(data, e), method)
        interaction = code is MethodCode.A5
        f = _conditional_fit(data, interaction)
        if data.outcome_kind is Outcome.BINARY:
            return Estimate(standardize_binary(f, untreated_target(data)), method)
        res = _standardized_tte(
            f, untreated_target(data), data, code, _require_factory(rng_factory)
        )
        return Estimate(res.value, method, m_used=res.m_used, m_capped=res.capped)
    except EstimationError as err:
        return Estimate(
            None, method, failed=True, failure_reason=f"{type(err).__name__}: {err}"
        )


def estimate_itc(
    study1: ObsDataset,
    agg: AggregateData,
    method: MethodId,
    rng_factory: RngFactory | None = None,
) -> Estimate:
    """Apply one anchored-comparison method to trial-1 data plus the trial-2 summary."""
    if method.setting is not Setting.ITC:
        raise InvalidArgument("method belongs to the single-study setting")
    code = method.code
    try:
        if code is MethodCode.A1:
            theta_ac = _treatment_only(study1)
        elif code is MethodCode.A2:
            sol = maic_weights_m1(study1.l, agg.mu_l2)
            theta_ac = _treatment_only(study1, sol.weights.values)
        elif code is MethodCode.A3:
            sol = maic_weights_m2(study1.l, agg.mu_l2, agg.sd_l2)
            theta_ac = _treatment_only(study1, sol.weights.values)
        else:
            interaction = code is MethodCode.A5
            f = _conditional_fit(study1, interaction)
            factory = _require_factory(rng_factory)
            target = pseudo_normal_target(
                agg.mu_l2, agg.sd_l2, factory("target", code.value)
            )
            if study1.outcome_kind is Outcome.BINARY:
                theta_ac = standardize_binary(f, target)
            else:
                res = _standardized_tte(f, target, study1, code, factory)
                return Estimate(
                    res.value - agg.theta_ab,
                    method,
                    m_used=res.m_used,
                    m_capped=res.capped,
                )
        return Estimate(theta_ac - agg.theta_ab, method)
    except EstimationError as err:
        return Estimate(
            None, method, failed=True, failure_reason=f"{type(err).__name__}: {err}"
        )
