"""Synthetic cohorts for the single-study and two-trial comparison designs.

A single continuous covariate L ~ Normal(0, 1.5) drives treatment assignment
(or trial membership), outcome risk, or both, depending on the scenario
coefficients. Binary outcomes follow a logistic model; time-to-event outcomes
follow a Weibull hazard with staggered uniform recruitment over two years and
administrative censoring when calendar follow-up ends at year ten. Recorded
times are measured from each subject's own entry.

Scenario registry
-----------------
Sixteen labels are registered: ``SS-1A`` .. ``SS-4B`` for the observational
single-study design and ``ITC-1A`` .. ``ITC-4B`` for the anchored two-trial
design. Families 1-4 switch on covariate effects (prognostic, effect
modifying), and the A/B variant selects a linear or quadratic tilt:

=======  ======  ======  ======  =======  =======
family   beta1   beta2   beta3   kappa1   kappa2
=======  ======  ======  ======  =======  =======
1        0       0       0       1 (A)    1 (B)
2        1       0       0       1 (A)    1 (B)
3        1       1       0       1 (A)    1 (B)
4        1       0       1       1 (A)    1 (B)
=======  ======  ======  ======  =======  =======

In the two-trial design the tilt governs membership of trial 1 (the active
comparison), trial 2 recruits the complement, and the trial-2 outcome model
drops the treatment interaction terms while keeping beta1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import fit as fitmod
from .errors import InvalidArgument, PoolExhausted
from .links import expit

COV_SD = 1.5
ENTRY_WINDOW = 2.0
HORIZON = 10.0
WEIBULL_SHAPE = 1.5
BASELINE_RATE = 0.1
# baseline log-odds shared by every binary outcome model
BINARY_BASELINE_LOGODDS = 1.0


class Design(enum.Enum):
    SINGLE = "single"
    ITC = "itc"


class Outcome(enum.Enum):
    BINARY = "binary"
    TTE = "tte"


class Origin(enum.Enum):
    OBSERVATIONAL = "observational"
    TRIAL1 = "trial1"
    TRIAL2 = "trial2"


_FAMILY = {
    "1": (0.0, 0.0, 0.0),
    "2": (1.0, 0.0, 0.0),
    "3": (1.0, 1.0, 0.0),
    "4": (1.0, 0.0, 1.0),
}
_TILT = {"A": (1.0, 0.0), "B": (0.0, 1.0)}

SCENARIO_LABELS = tuple(
    f"{prefix}-{fam}{var}"
    for prefix in ("SS", "ITC")
    for fam in "1234"
    for var in "AB"
)


def _registry_entry(label: str):
    try:
        prefix, code = label.split("-")
        betas = _FAMILY[code[0]]
        tilt = _TILT[code[1]]
        design = {"SS": Design.SINGLE, "ITC": Design.ITC}[prefix]
    except (ValueError, KeyError, IndexError):
        return None
    if len(code) != 2:
        return None
    return design, betas, tilt


@dataclass(frozen=True)
class ScenarioSpec:
    """Full parameterization of one simulation scenario.

    ``label`` must either match a registered scenario (in which case all
    coefficients must equal the registered values) or start with ``custom``.
    """

    design: Design
    outcome: Outcome
    alpha: float
    beta1: float
    beta2: float
    beta3: float
    kappa1: float
    kappa2: float
    label: str

    def __post_init__(self):
        entry = _registry_entry(self.label)
        if entry is not None:
            design, (b1, b2, b3), (k1, k2) = entry
            same = (
                self.design is design
                and (self.alpha, self.beta1, self.beta2, self.beta3) == (1.0, b1, b2, b3)
                and (self.kappa1, self.kappa2) == (k1, k2)
            )
            if not same:
                raise InvalidArgument(
                    f"label {self.label!r} is registered with different parameters"
                )
        elif not self.label.startswith("custom"):
            raise InvalidArgument(
                f"unregistered scenario label {self.label!r}; use a 'custom' prefix"
            )


def scenario(label: str, outcome: Outcome | str) -> ScenarioSpec:
    """Look up a registered scenario label for the given outcome type."""
    if isinstance(outcome, str):
        outcome = Outcome(outcome)
    entry = _registry_entry(label)
    if entry is None:
        raise InvalidArgument(f"unknown scenario label {label!r}")
    design, (b1, b2, b3), (k1, k2) = entry
    return ScenarioSpec(
        design=design,
        outcome=outcome,
        alpha=1.0,
        beta1=b1,
        beta2=b2,
        beta3=b3,
        kappa1=k1,
        kappa2=k2,
        label=label,
    )


@dataclass(frozen=True)
class Subject:
    l: float
    x: int
    y: int | None = None
    time: float | None = None
    event: int | None = None
    entry: float | None = None


@dataclass
class ObsDataset:
    """A homogeneous cohort stored columnwise.

    Binary cohorts carry ``y``; time-to-event cohorts carry ``time``,
    ``event`` and ``entry``, with the invariant that a censored record's
    time equals its administrative follow-up ``HORIZON - entry``.
    """

    l: np.ndarray
    x: np.ndarray
    outcome_kind: Outcome
    origin: Origin
    y: np.ndarray | None = None
    time: np.ndarray | None = None
    event: np.ndarray | None = None
    entry: np.ndarray | None = None

    def __post_init__(self):
        n = self.l.shape[0]
        if n == 0:
            raise InvalidArgument("dataset must be nonempty")
        if self.x.shape != (n,):
            raise InvalidArgument("x and l lengths must agree")
        if self.outcome_kind is Outcome.BINARY:
            if self.y is None or self.y.shape != (n,):
                raise InvalidArgument("binary dataset needs y of matching length")
            if self.time is not None or self.event is not None:
                raise InvalidArgument("binary dataset cannot carry survival columns")
        else:
            for name in ("time", "event", "entry"):
                col = getattr(self, name)
                if col is None or col.shape != (n,):
                    raise InvalidArgument(f"survival dataset needs {name}")
            if self.y is not None:
                raise InvalidArgument("survival dataset cannot carry y")
            censored = self.event == 0
            follow = HORIZON - self.entry
            if np.any(np.abs(self.time[censored] - follow[censored]) > 1e-12):
                raise InvalidArgument("censored times must equal remaining follow-up")
            if np.any(self.time > follow + 1e-12):
                raise InvalidArgument("times cannot exceed remaining follow-up")

    @property
    def n(self) -> int:
        return self.l.shape[0]

    @property
    def subjects(self) -> list[Subject]:
        if self.outcome_kind is Outcome.BINARY:
            return [
                Subject(l=float(a), x=int(b), y=int(c))
                for a, b, c in zip(self.l, self.x, self.y)
            ]
        return [
            Subject(l=float(a), x=int(b), time=float(t), event=int(d), entry=float(e))
            for a, b, t, d, e in zip(self.l, self.x, self.time, self.event, self.entry)
        ]


@dataclass(frozen=True)
class AggregateData:
    """Published-style summary of trial 2: effect estimate and covariate moments."""

    theta_ab: float
    se_theta_ab: float
    mu_l2: float
    sd_l2: float

    def __post_init__(self):
        if not (self.se_theta_ab > 0):
            raise InvalidArgument("se_theta_ab must be positive")
        if not (self.sd_l2 > 0):
            raise InvalidArgument("sd_l2 must be positive")


def _outcome_lp(alpha, beta1, beta2, beta3, x, l):
    return alpha * x + beta1 * l + beta2 * x * l + beta3 * x * l * l


def weibull_event_time(linear_predictor, u):
    """Invert the Weibull survival function at quantile u.

    ``u`` is the survival probability, drawn uniformly on the open interval
    (0, 1): small u maps to long times, u near 1 to times near zero.
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
        raise InvalidArgument("u must lie strictly inside (0, 1)")
    lp = np.asarray(linear_predictor, dtype=float)
    sigma = (BASELINE_RATE * np.exp(lp)) ** (-1.0 / WEIBULL_SHAPE)
    t = sigma * (-np.log(u_arr)) ** (1.0 / WEIBULL_SHAPE)
    return t if t.ndim else float(t)


def _interior_uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    u = rng.uniform(size=size)
    bad = (u <= 0.0) | (u >= 1.0)
    while np.any(bad):  # essentially never; protects the open-interval contract
        u[bad] = rng.uniform(size=int(bad.sum()))
        bad = (u <= 0.0) | (u >= 1.0)
    return u


def _draw_tte(lp, rng):
    u = _interior_uniform(rng, lp.shape[0])
    raw = weibull_event_time(lp, u)
    entry = rng.uniform(0.0, ENTRY_WINDOW, size=lp.shape[0])
    follow = HORIZON - entry
    event = raw <= follow
    time = np.where(event, raw, follow)
    return time, event.astype(np.int8), entry


def _draw_binary(lp, rng):
    p = expit(BINARY_BASELINE_LOGODDS + lp)
    return (rng.uniform(size=lp.shape[0]) < p).astype(np.int8)


def gen_single_study(spec: ScenarioSpec, n: int, rng: np.random.Generator) -> ObsDataset:
    """Draw one observational cohort of size n under the given scenario."""
    if spec.design is not Design.SINGLE:
        raise InvalidArgument("gen_single_study needs a single-study scenario")
    if n < 2:
        raise InvalidArgument("n must be at least 2")
    l = rng.normal(0.0, COV_SD, size=n)
    p_treat = expit(spec.kappa1 * l + spec.kappa2 * l * l)
    x = (rng.uniform(size=n) < p_treat).astype(np.int8)
    lp = _outcome_lp(spec.alpha, spec.beta1, spec.beta2, spec.beta3, x, l)
    if spec.outcome is Outcome.BINARY:
        y = _draw_binary(lp, rng)
        return ObsDataset(l=l, x=x, outcome_kind=spec.outcome, origin=Origin.OBSERVATIONAL, y=y)
    time, event, entry = _draw_tte(lp, rng)
    return ObsDataset(
        l=l, x=x, outcome_kind=spec.outcome, origin=Origin.OBSERVATIONAL,
        time=time, event=event, entry=entry,
    )


def gen_itc_pair(
    spec: ScenarioSpec,
    n_per_study: int = 1000,
    pool_size: int = 100_000,
    rng: np.random.Generator = None,
) -> tuple[ObsDataset, ObsDataset]:
    """Draw the two-trial pair: trial 1 (active comparison) and trial 2.

    A pool of covariate values is split by the tilt probability, each trial
    samples ``n_per_study`` members without replacement from its side, and
    treatment is randomized 1:1 within trial. Trial 2 keeps beta1 but has no
    treatment interactions, so its two arms differ by a zero log effect.
    """
    if spec.design is not Design.ITC:
        raise InvalidArgument("gen_itc_pair needs a two-trial scenario")
    if n_per_study < 2:
        raise InvalidArgument("n_per_study must be at least 2")
    if rng is None:
        raise InvalidArgument("rng is required")
    l_pool = rng.normal(0.0, COV_SD, size=pool_size)
    p_trial1 = expit(spec.kappa1 * l_pool + spec.kappa2 * l_pool * l_pool)
    in_trial1 = rng.uniform(size=pool_size) < p_trial1
    idx1 = np.flatnonzero(in_trial1)
    idx2 = np.flatnonzero(~in_trial1)
    if idx1.size < n_per_study or idx2.size < n_per_study:
        raise PoolExhausted(
            f"pool of {pool_size} split {idx1.size}/{idx2.size}; "
            f"need {n_per_study} per trial"
        )

    def build(idx, origin, alpha, beta2, beta3):
        take = rng.choice(idx.size, size=n_per_study, replace=False)
        l = l_pool[idx[take]]
        x = (rng.uniform(size=n_per_study) < 0.5).astype(np.int8)
        lp = _outcome_lp(alpha, spec.beta1, beta2, beta3, x, l)
        if spec.outcome is Outcome.BINARY:
            return ObsDataset(
                l=l, x=x, outcome_kind=spec.outcome, origin=origin, y=_draw_binary(lp, rng)
            )
        time, event, entry = _draw_tte(lp, rng)
        return ObsDataset(
            l=l, x=x, outcome_kind=spec.outcome, origin=origin,
            time=time, event=event, entry=entry,
        )

    study1 = build(idx1, Origin.TRIAL1, spec.alpha, spec.beta2, spec.beta3)
    study2 = build(idx2, Origin.TRIAL2, 0.0, 0.0, 0.0)
    return study1, study2


def reduce_to_aggregate(study2: ObsDataset) -> AggregateData:
    """Collapse trial 2 to the summary an indirect comparison would publish.

    The effect estimate is the unadjusted treatment coefficient with its
    model-based standard error from the observed information; the covariate
    summary is the sample mean and (n-1)-denominator standard deviation.
    """
    if study2.origin is not Origin.TRIAL2:
        raise InvalidArgument("aggregate reduction applies to trial 2 data")
    if study2.outcome_kind is Outcome.BINARY:
        f = fitmod.fit_logistic(
            study2.y,
            fitmod.DesignSpec((fitmod.Term.INTERCEPT, fitmod.Term.X)),
            study2.x,
            study2.l,
        )
        theta = f.coefficients[fitmod.Term.X]
        cov = np.linalg.inv(f.information)
        se = float(np.sqrt(cov[1, 1]))
    else:
        f = fitmod.fit_cox(
            study2.time,
            study2.event,
            fitmod.DesignSpec((fitmod.Term.X,)),
            study2.x,
            study2.l,
        )
        theta = f.coefficients[fitmod.Term.X]
        se = float(np.sqrt(np.linalg.inv(f.information)[0, 0]))
    return AggregateData(
        theta_ab=float(theta),
        se_theta_ab=se,
        mu_l2=float(np.mean(study2.l)),
        sd_l2=float(np.std(study2.l, ddof=1)),
    )
