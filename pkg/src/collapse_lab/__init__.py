"""Weighting versus standardization for marginal odds and hazard ratios.

Simulation laboratory for non-collapsible effect measures: synthetic
single-study and anchored two-trial scenarios, five estimators per setting,
exact or large-sample true values, and a replication harness with
deterministic named random streams.
"""

from .errors import (
    CollapseLabError,
    DegenerateMarginal,
    DegenerateResponse,
    EstimationError,
    InfeasibleTarget,
    InsufficientReplications,
    InvalidArgument,
    InvalidPropensity,
    MonotoneLikelihood,
    NoEvents,
    PoolExhausted,
    RankDeficient,
    SeparationDetected,
    SolverFailure,
)
from .estimators import (
    Estimate,
    MethodCode,
    MethodId,
    Setting,
    estimate_itc,
    estimate_single,
    itc_methods,
    single_methods,
)
from .fit import DesignSpec, FitCox, FitLogistic, Term, fit_cox, fit_logistic, linear_predictor
from .harness import PerfSummary, TruthCache, run_replication, run_scenario, summarize
from .standardize import (
    AdaptiveResult,
    StepCurve,
    SurvivalStandardizer,
    TargetKind,
    TargetPopulation,
    adaptive_m,
    full_cohort_target,
    marginal_survival_curves,
    pseudo_normal_target,
    simulate_marginal_arm,
    standardize_binary,
    standardize_survival,
    untreated_target,
)
from .streams import stream
from .synth import (
    SCENARIO_LABELS,
    AggregateData,
    Design,
    ObsDataset,
    Origin,
    Outcome,
    ScenarioSpec,
    Subject,
    gen_itc_pair,
    gen_single_study,
    reduce_to_aggregate,
    scenario,
    weibull_event_time,
)
from .truth import TruthResult, true_marginal_loghr, true_marginal_logor, true_value
from .weights import (
    MaicSolution,
    Provenance,
    WeightVector,
    atu_weights,
    estimate_propensity,
    maic_weights_m1,
    maic_weights_m2,
)

__version__ = "0.1.0"
