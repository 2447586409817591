"""Weighted logistic and Cox regression engines.

Both solvers accept per-observation weights that may be fractional (balance
weights, inverse-odds weights) and report coefficients keyed by model term,
so downstream code never has to track column order. The Cox engine uses the
Breslow convention for tied event times and also returns the weighted
Breslow baseline cumulative hazard, which the survival standardization
pipeline consumes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateResponse,
    InvalidArgument,
    MonotoneLikelihood,
    NoEvents,
    RankDeficient,
    SeparationDetected,
    SolverFailure,
)
from .links import expit

MAX_ITER = 50
COEF_BOUND = 30.0  # beyond this the likelihood is flat to machine precision


class Term(enum.Enum):
    """Model terms built from treatment x and covariate l."""

    INTERCEPT = "1"
    X = "x"
    L = "l"
    XL = "x:l"
    XL2 = "x:l^2"
    L2 = "l^2"


def term_column(term: Term, x, l) -> np.ndarray:
    """Evaluate one design column; x may be scalar or array, l is array."""
    l = np.asarray(l, dtype=float)
    x = np.broadcast_to(np.asarray(x, dtype=float), l.shape)
    if term is Term.INTERCEPT:
        return np.ones_like(l)
    if term is Term.X:
        return x.copy()
    if term is Term.L:
        return l.copy()
    if term is Term.XL:
        return x * l
    if term is Term.XL2:
        return x * l * l
    if term is Term.L2:
        return l * l
    raise InvalidArgument(f"unknown term {term!r}")


@dataclass(frozen=True)
class DesignSpec:
    """An ordered collection of distinct model terms."""

    terms: tuple[Term, ...]

    def __post_init__(self):
        if len(self.terms) == 0:
            raise InvalidArgument("design needs at least one term")
        if len(set(self.terms)) != len(self.terms):
            raise InvalidArgument("design terms must be distinct")
        for t in self.terms:
            if not isinstance(t, Term):
                raise InvalidArgument(f"not a model term: {t!r}")

    def matrix(self, x, l) -> np.ndarray:
        return np.column_stack([term_column(t, x, l) for t in self.terms])


@dataclass
class FitLogistic:
    coefficients: dict[Term, float]
    converged: bool
    n_iter: int
    log_likelihood: float
    information: np.ndarray = field(repr=False)


@dataclass
class FitCox:
    coefficients: dict[Term, float]
    baseline_times: np.ndarray = field(repr=False)
    baseline_cumhaz: np.ndarray = field(repr=False)
    converged: bool = True
    information: np.ndarray = field(default=None, repr=False)


def linear_predictor(fit, x, l) -> np.ndarray:
    """Evaluate a fitted model's linear predictor at (x, l)."""
    l = np.asarray(l, dtype=float)
    out = np.zeros_like(l)
    for term, coef in fit.coefficients.items():
        out += coef * term_column(term, x, l)
    return out


def _as_weights(weights, n) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise InvalidArgument("weights length must match data length")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidArgument("weights must be finite and nonnegative")
    if not np.any(w > 0):
        raise InvalidArgument("at least one weight must be positive")
    return w


def fit_logistic(response, design: DesignSpec, x, l, weights=None) -> FitLogistic:
    """Weighted logistic regression by iteratively reweighted least squares.

    Parameters
    ----------
    response : array of {0, 1}
        Outcome indicator. The treatment indicator itself when fitting a
        propensity model.
    design : DesignSpec
        Columns built from (x, l); propensity designs simply omit X terms.
    x, l : arrays
        Treatment indicator and covariate, both length n.
    weights : array, optional
        Nonnegative case weights; omitted means unit weights.

    Stops when the absolute deviance change falls below 1e-8 or the relative
    coefficient change falls below 1e-10.
    """
    y = np.asarray(response, dtype=float)
    n = y.shape[0]
    if n < 2:
        raise InvalidArgument("need at least two observations")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise InvalidArgument("response must be coded 0/1")
    w = _as_weights(weights, n)
    m = design.matrix(x, l)
    if m.shape[0] != n:
        raise InvalidArgument("x, l, and response lengths must agree")

    active = w > 0
    if np.min(y[active]) == np.max(y[active]):
        raise DegenerateResponse("response takes a single value on weighted data")

    def deviance_and_ll(beta):
        eta = m @ beta
        mu = np.clip(expit(eta), 1e-12, 1.0 - 1e-12)
        ll = float(np.sum(w * (y * np.log(mu) + (1.0 - y) * np.log1p(-mu))))
        return -2.0 * ll, ll

    beta = np.zeros(m.shape[1])
    dev, ll = deviance_and_ll(beta)
    converged = False
    n_iter = 0
    for n_iter in range(1, MAX_ITER + 1):
        eta = m @ beta
        mu = expit(eta)
        var = np.clip(mu * (1.0 - mu), 1e-10, None)
        irls_w = w * var
        z = eta + (y - mu) / var
        a = m.T @ (irls_w[:, None] * m)
        b = m.T @ (irls_w * z)
        try:
            beta_new = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            raise RankDeficient("singular weighted normal equations")
        if not np.all(np.isfinite(beta_new)):
            raise SeparationDetected("logistic coefficients diverged")
        if np.max(np.abs(beta_new)) > COEF_BOUND:
            raise SeparationDetected(
                f"|coefficient| exceeded {COEF_BOUND:g}; response is separated"
            )
        dev_new, ll = deviance_and_ll(beta_new)
        rel = np.max(np.abs(beta_new - beta)) / max(1.0, np.max(np.abs(beta_new)))
        beta = beta_new
        if abs(dev_new - dev) < 1e-8 or rel < 1e-10:
            converged = True
            dev = dev_new
            break
        dev = dev_new
    if not converged:
        raise SolverFailure(f"IRLS did not converge in {MAX_ITER} iterations")

    mu = expit(m @ beta)
    info = m.T @ ((w * mu * (1.0 - mu))[:, None] * m)
    return FitLogistic(
        coefficients=dict(zip(design.terms, beta.tolist())),
        converged=True,
        n_iter=n_iter,
        log_likelihood=ll,
        information=info,
    )


def _suffix_sums(a: np.ndarray) -> np.ndarray:
    return np.cumsum(a[::-1], axis=0)[::-1]


def fit_cox(time, event, design: DesignSpec, x, l, weights=None) -> FitCox:
    """Weighted Cox regression with Breslow ties and baseline hazard.

    The model has no intercept by construction; passing a design containing
    one is an error. Convergence requires the score norm to drop below 1e-9
    times the weighted event count (floored at one) within 50 Newton steps,
    with step halving when a step would decrease the partial likelihood; the
    scaling keeps the threshold above the score's roundoff floor, which
    grows with the risk-set sums.
    """
    if Term.INTERCEPT in design.terms:
        raise InvalidArgument("proportional hazards designs have no intercept")
    t = np.asarray(time, dtype=float)
    d = np.asarray(event, dtype=float)
    n = t.shape[0]
    if n < 2:
        raise InvalidArgument("need at least two observations")
    if not np.all((d == 0.0) | (d == 1.0)):
        raise InvalidArgument("event must be coded 0/1")
    if np.any(t <= 0) or not np.all(np.isfinite(t)):
        raise InvalidArgument("times must be positive and finite")
    w = _as_weights(weights, n)
    m = design.matrix(x, l)
    if m.shape[0] != n:
        raise InvalidArgument("x, l, and time lengths must agree")

    is_event = (d == 1.0) & (w > 0)
    if not np.any(is_event):
        raise NoEvents("no events with positive weight")
    if Term.X in design.terms:
        xcol = m[:, design.terms.index(Term.X)]
        # with a treatment column, events confined to one arm push the
        # coefficient to infinity
        if not (np.any(is_event & (xcol == 0)) and np.any(is_event & (xcol != 0))):
            raise MonotoneLikelihood("all weighted events lie in a single arm")

    order = np.argsort(t, kind="stable")
    t, d, w, m = t[order], d[order], w[order], m[order]
    is_event = (d == 1.0) & (w > 0)
    # risk set of row i is every row with time >= t_i; ties share the set
    first_tie = np.searchsorted(t, t, side="left")
    k = m.shape[1]
    ev_idx = np.flatnonzero(is_event)
    ev_w = w[ev_idx]
    # with a lone 0/1 column the squared column equals itself, so S2 == S1
    lone_binary = k == 1 and bool(np.all((m[:, 0] == 0.0) | (m[:, 0] == 1.0)))

    def full_eval(beta):
        eta = np.clip(m @ beta, -700, 700)
        r = w * np.exp(eta)
        s0 = _suffix_sums(r)[first_tie]
        s1 = _suffix_sums(r[:, None] * m)[first_tie]
        if lone_binary:
            s2 = s1[:, :, None]
        else:
            s2 = _suffix_sums(r[:, None, None] * (m[:, :, None] * m[:, None, :]))[
                first_tie
            ]
        mean1 = s1[ev_idx] / s0[ev_idx, None]
        u = (ev_w[:, None] * (m[ev_idx] - mean1)).sum(axis=0)
        cov = s2[ev_idx] / s0[ev_idx, None, None] - mean1[:, :, None] * mean1[:, None, :]
        info = (ev_w[:, None, None] * cov).sum(axis=0)
        pl = float(np.sum(ev_w * (eta[ev_idx] - np.log(s0[ev_idx]))))
        return u, info, pl, s0

    beta = np.zeros(k)
    u, info, pl, s0 = full_eval(beta)
    converged = False
    score_tol = 1e-9 * max(1.0, float(np.sum(ev_w)))
    for _ in range(MAX_ITER):
        if np.linalg.norm(u) < score_tol:
            converged = True
            break
        try:
            step = np.linalg.solve(info, u)
        except np.linalg.LinAlgError:
            raise RankDeficient("singular information matrix")
        # near the optimum true gains sink below evaluation roundoff, so the
        # acceptance slack must scale with the likelihood's magnitude
        slack = 1e-10 * max(1.0, abs(pl))
        scale = 1.0
        for _ in range(30):
            cand = beta + scale * step
            u_new, info_new, pl_new, s0_new = full_eval(cand)
            if pl_new >= pl - slack:
                break
            scale *= 0.5
        beta, u, info, pl, s0 = cand, u_new, info_new, pl_new, s0_new
        if not np.all(np.isfinite(beta)) or np.max(np.abs(beta)) > COEF_BOUND:
            raise MonotoneLikelihood("Cox coefficients diverged")
    if not converged:
        raise SolverFailure(f"Cox-Newton did not converge in {MAX_ITER} iterations")

    # weighted Breslow baseline at distinct event times
    ev_t = t[ev_idx]
    uniq, start = np.unique(ev_t, return_index=True)
    d_w = np.add.reduceat(ev_w, start)
    s0_at = s0[ev_idx][start]
    cumhaz = np.cumsum(d_w / s0_at)
    return FitCox(
        coefficients=dict(zip(design.terms, beta.tolist())),
        baseline_times=uniq,
        baseline_cumhaz=cumhaz,
        converged=True,
        information=info,
    )
