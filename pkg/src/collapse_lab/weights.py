"""Propensity-based and moment-matching balance weights.

Two families live here. Inverse-odds weights re-weight an observational
cohort so the treated arm matches the untreated covariate distribution
(treated get (1-e)/e, untreated keep weight one). Entropy-tilting weights
re-weight individual-level trial data so that weighted covariate moments hit
externally reported targets; they minimize a strictly convex exponential
objective whose gradient is exactly the moment imbalance.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleTarget, InvalidArgument, InvalidPropensity, SolverFailure
from .fit import DesignSpec, FitLogistic, Term, fit_logistic, linear_predictor
from .links import expit

_GRAD_TOL = 1e-11  # on the weight-normalized gradient; implies balance well under 1e-8


class Provenance(enum.Enum):
    UNIT = "unit"
    ATU = "atu"
    MAIC1 = "maic1"
    MAIC2 = "maic2"


@dataclass
class WeightVector:
    values: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InvalidArgument("weights must be finite and nonnegative")
        if not np.any(v > 0):
            raise InvalidArgument("at least one weight must be positive")
        self.values = v

    @property
    def ess(self) -> float:
        """Kish effective sample size (sum w)^2 / sum w^2."""
        s = float(np.sum(self.values))
        return s * s / float(np.sum(self.values**2))


@dataclass
class MaicSolution:
    """Tilting coefficients plus diagnostics for a moment-matching solve."""

    a1: float
    a2: float | None
    objective_value: float
    ess: float
    weights: WeightVector


def estimate_propensity(x, l, quadratic: bool = False) -> np.ndarray:
    """Fit the treatment model on l (optionally plus l^2) and return scores.

    Fitted probabilities are mathematically inside (0, 1) but can round to
    the endpoints in double precision when the linear predictor is extreme;
    they are clipped back so downstream weighting sees a valid score (the
    resulting weight is vanishingly small either way).
    """
    terms = (Term.INTERCEPT, Term.L, Term.L2) if quadratic else (Term.INTERCEPT, Term.L)
    f: FitLogistic = fit_logistic(x, DesignSpec(terms), x, l)
    return np.clip(expit(linear_predictor(f, 0.0, l)), 1e-12, 1.0 - 1e-12)


def atu_weights(x, e) -> WeightVector:
    """Inverse-odds weights targeting the untreated population.

    Treated subjects get (1 - e) / e; untreated subjects get exactly 1.
    """
    e = np.asarray(e, dtype=float)
    x = np.asarray(x)
    if e.shape != x.shape:
        raise InvalidArgument("x and e lengths must agree")
    if np.any(e <= 0.0) or np.any(e >= 1.0) or not np.all(np.isfinite(e)):
        raise InvalidPropensity("propensity scores must lie strictly in (0, 1)")
    values = np.where(x == 1, (1.0 - e) / e, 1.0)
    return WeightVector(values=values, provenance=Provenance.ATU)


def _tilt_solve(c: np.ndarray, max_iter: int, label: str):
    """Minimize sum(exp(c @ a)) over a by damped Newton with gradient fallback.

    ``c`` is n x p centered moment columns. Returns the optimizer; the
    objective's gradient is c' w with w = exp(c a), so a small normalized
    gradient certifies weighted-moment balance.
    """
    p = c.shape[1]
    a = np.zeros(p)

    def parts(a_try):
        w = np.exp(c @ a_try)
        return w, float(np.sum(w))

    w, obj = parts(a)
    for _ in range(max_iter):
        grad = c.T @ w
        if np.linalg.norm(grad) <= _GRAD_TOL * np.sum(w):
            return a, w, obj
        hess = (c * w[:, None]).T @ c
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = -grad / max(np.sum(w), 1.0)
        scale = 1.0
        for _ in range(60):
            cand = a + scale * step
            w_cand, obj_cand = parts(cand)
            if np.isfinite(obj_cand) and obj_cand <= obj + 1e-12 * max(1.0, obj):
                a, w, obj = cand, w_cand, obj_cand
                break
            scale *= 0.5
        else:
            raise SolverFailure(f"{label}: no descent step found")
    grad = c.T @ w
    if np.linalg.norm(grad) <= _GRAD_TOL * np.sum(w):
        return a, w, obj
    raise SolverFailure(f"{label}: iteration budget exhausted")


def maic_weights_m1(l, mu_target: float, max_iter: int = 200) -> MaicSolution:
    """Tilt weights matching the weighted covariate mean to ``mu_target``.

    The target must lie strictly inside the observed range, otherwise no
    finite tilt exists.
    """
    l = np.asarray(l, dtype=float)
    if l.size < 2:
        raise InvalidArgument("need at least two covariate values")
    if not (np.min(l) < mu_target < np.max(l)):
        raise InfeasibleTarget(
            f"target mean {mu_target:g} outside the open covariate range"
        )
    c = (l - mu_target)[:, None]
    a, w, obj = _tilt_solve(c, max_iter, "mean tilt")
    wv = WeightVector(values=w, provenance=Provenance.MAIC1)
    return MaicSolution(a1=float(a[0]), a2=None, objective_value=obj, ess=wv.ess, weights=wv)


def _second_moment_feasible(l: np.ndarray, t1: float, t2: float) -> bool:
    # the attainable set is the interior of the convex hull of {(l_i, l_i^2)};
    # every point sits on a convex curve, so the hull floor is the chord chain
    # between consecutive distinct values and the ceiling is the outer chord
    u = np.unique(l)
    lo, hi = u[0], u[-1]
    if not (lo < t1 < hi):
        return False
    top = t1 * (lo + hi) - lo * hi
    j = np.searchsorted(u, t1, side="right") - 1
    a, b = u[j], u[min(j + 1, u.size - 1)]
    if a == b:  # t1 equals the largest distinct value; caught above, defensive
        return False
    floor = t1 * (a + b) - a * b
    return floor < t2 < top


def maic_weights_m2(l, mu_target: float, sd_target: float, max_iter: int = 500) -> MaicSolution:
    """Tilt weights matching weighted mean and weighted raw second moment.

    ``sd_target`` is a standard deviation; the matched second moment is
    ``mu_target**2 + sd_target**2``.
    """
    l = np.asarray(l, dtype=float)
    if l.size < 3:
        raise InvalidArgument("need at least three covariate values")
    if not (sd_target > 0):
        raise InvalidArgument("sd_target must be positive")
    t1 = mu_target
    t2 = mu_target * mu_target + sd_target * sd_target
    if not _second_moment_feasible(l, t1, t2):
        raise InfeasibleTarget(
            f"moment pair ({t1:g}, {t2:g}) outside the attainable interior"
        )
    c = np.column_stack([l - t1, l * l - t2])
    a, w, obj = _tilt_solve(c, max_iter, "mean+variance tilt")
    wv = WeightVector(values=w, provenance=Provenance.MAIC2)
    return MaicSolution(
        a1=float(a[0]), a2=float(a[1]), objective_value=obj, ess=wv.ess, weights=wv
    )
