"""Replication harness: run a scenario many times and summarize performance.

Each replication draws fresh data from its own named stream, applies all
five methods, and records failures instead of aborting. Summaries follow
the usual simulation-study conventions: mean with Monte Carlo standard
error, empirical SE with its own Monte Carlo standard error, and bias
against the true marginal effect. Replications are independent, so they can
run across worker processes; stream addressing keeps results bit-identical
whatever the worker count.
"""

from __future__ import annotations

import csv
import math
import multiprocessing
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InsufficientReplications, InvalidArgument
from .estimators import (
    Estimate,
    MethodId,
    estimate_itc,
    estimate_single,
    itc_methods,
    single_methods,
)
from .streams import stream
from .synth import (
    Design,
    Outcome,
    ScenarioSpec,
    gen_itc_pair,
    gen_single_study,
    reduce_to_aggregate,
)
from .truth import TruthResult, true_value

DEFAULT_N_SINGLE = 2000
DEFAULT_N_PER_STUDY = 1000
WORKERS_ENV_VAR = "COLLAPSE_LAB_WORKERS"


@dataclass
class PerfSummary:
    method: MethodId
    n_reps: int
    n_failed: int
    mean: float
    mcse_mean: float
    emp_se: float
    mcse_emp_se: float
    truth: float
    bias: float


def summarize(estimates: list[Estimate], truth: float) -> PerfSummary:
    """Collapse one method's replications into performance measures.

    Failed estimates are excluded from every moment but counted.
    """
    if not estimates:
        raise InsufficientReplications("no estimates to summarize")
    method = estimates[0].method
    if any(e.method != method for e in estimates):
        raise InvalidArgument("summaries cover one method at a time")
    values = np.array([e.value for e in estimates if not e.failed], dtype=float)
    n_failed = len(estimates) - values.size
    if values.size < 2:
        raise InsufficientReplications(
            f"{values.size} usable replications for {method.name}; need at least 2"
        )
    n = values.size
    mean = float(np.mean(values))
    emp_se = float(np.std(values, ddof=1))
    return PerfSummary(
        method=method,
        n_reps=n,
        n_failed=n_failed,
        mean=mean,
        mcse_mean=emp_se / math.sqrt(n),
        emp_se=emp_se,
        mcse_emp_se=emp_se / math.sqrt(2.0 * (n - 1)),
        truth=truth,
        bias=mean - truth,
    )


def resolve_workers(workers: int | None) -> int:
    """Explicit count, else the COLLAPSE_LAB_WORKERS variable, else all cores."""
    if workers is not None:
        if workers < 1:
            raise InvalidArgument("workers must be positive")
        return workers
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        try:
            workers = int(env)
        except ValueError:
            raise InvalidArgument(f"{WORKERS_ENV_VAR}={env!r} is not an integer")
        if workers < 1:
            raise InvalidArgument(f"{WORKERS_ENV_VAR} must be positive")
        return workers
    return os.cpu_count() or 1


def run_replication(spec: ScenarioSpec, n: int, seed: int, rep: int) -> list[Estimate]:
    """Generate one dataset (or trial pair) and apply all five methods."""
    rng = stream(seed, spec.label, spec.outcome.value, rep, "data")

    def factory(*path):
        return stream(seed, spec.label, spec.outcome.value, rep, *path)

    if spec.design is Design.SINGLE:
        data = gen_single_study(spec, n, rng)
        return [estimate_single(data, mid, factory) for mid in single_methods()]
    study1, study2 = gen_itc_pair(spec, n_per_study=n, rng=rng)
    agg = reduce_to_aggregate(study2)
    return [estimate_itc(study1, agg, mid, factory) for mid in itc_methods()]


def _worker(args) -> list[Estimate]:
    spec, n, seed, rep = args
    return run_replication(spec, n, seed, rep)


def default_n(spec: ScenarioSpec) -> int:
    return DEFAULT_N_SINGLE if spec.design is Design.SINGLE else DEFAULT_N_PER_STUDY


def run_scenario(
    spec: ScenarioSpec,
    nsim: int,
    seed: int,
    n: int | None = None,
    workers: int | None = None,
    truth: TruthResult | float | None = None,
    truth_mc_size: int = 1_000_000,
    dump_path: str | Path | None = None,
) -> list[PerfSummary]:
    """Run ``nsim`` replications of one scenario and summarize each method.

    ``truth`` may be precomputed (a TruthResult or plain float); otherwise
    it is computed here. ``dump_path`` optionally writes one CSV row per
    (replication, method) with the raw estimate.
    """
    if nsim < 2:
        raise InvalidArgument("nsim must be at least 2")
    if n is None:
        n = default_n(spec)
    if truth is None:
        truth = true_value(spec, mc_size=truth_mc_size, seed=seed)
    truth_val = truth.value if isinstance(truth, TruthResult) else float(truth)

    jobs = [(spec, n, seed, rep) for rep in range(nsim)]
    n_workers = resolve_workers(workers)
    if n_workers == 1 or nsim < 4:
        per_rep = [_worker(job) for job in jobs]
    else:
        chunk = max(1, nsim // (n_workers * 8))
        with multiprocessing.Pool(n_workers) as pool:
            per_rep = pool.map(_worker, jobs, chunksize=chunk)

    if dump_path is not None:
        _dump_estimates(Path(dump_path), spec, per_rep)

    by_method = list(zip(*per_rep))
    return [summarize(list(col), truth_val) for col in by_method]


def _dump_estimates(path: Path, spec: ScenarioSpec, per_rep: list[list[Estimate]]):
    path.parent.mkdir(parents=True, exist_ok=True)
    new = not path.exists()
    with open(path, "a", newline="") as handle:
        writer = csv.writer(handle)
        if new:
            writer.writerow(
                ["scenario", "outcome", "rep", "method", "value",
                 "failed", "failure_reason", "m_used", "m_capped"]
            )
        for rep, ests in enumerate(per_rep):
            for e in ests:
                writer.writerow([
                    spec.label, spec.outcome.value, rep, e.method.code.value,
                    "" if e.value is None else f"{e.value:.10g}",
                    int(e.failed), e.failure_reason or "",
                    "" if e.m_used is None else e.m_used, int(e.m_capped),
                ])


class TruthCache:
    """File-backed memo of true values, one whitespace-separated record per
    line: ``label outcome mc_size seed value``. Quadrature entries store
    mc_size and seed as 0 since they depend on neither."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._mem: dict[tuple, float] = {}
        if self.path.exists():
            for line in self.path.read_text().splitlines():
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                label, outcome, mc_size, seed, value = line.split()
                self._mem[(label, outcome, int(mc_size), int(seed))] = float(value)

    def _key(self, spec: ScenarioSpec, mc_size: int, seed: int) -> tuple:
        if spec.outcome is Outcome.BINARY:
            return (spec.label, spec.outcome.value, 0, 0)
        return (spec.label, spec.outcome.value, mc_size, seed)

    def get_or_compute(self, spec: ScenarioSpec, mc_size: int, seed: int) -> float:
        key = self._key(spec, mc_size, seed)
        if key not in self._mem:
            value = true_value(spec, mc_size=mc_size, seed=seed).value
            self._mem[key] = value
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a") as handle:
                handle.write(" ".join(str(p) for p in key) + f" {value:.10g}\n")
        return self._mem[key]
