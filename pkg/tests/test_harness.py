import math

import pytest

from collapse_lab.errors import InsufficientReplications, InvalidArgument
from collapse_lab.estimators import Estimate, MethodCode, MethodId, Setting
from collapse_lab.harness import (
    DEFAULT_N_PER_STUDY,
    DEFAULT_N_SINGLE,
    WORKERS_ENV_VAR,
    TruthCache,
    default_n,
    resolve_workers,
    run_replication,
    run_scenario,
    summarize,
)
from collapse_lab.synth import scenario
from collapse_lab.truth import TruthResult


def _est(value, code="A1", failed=False, reason=None):
    return Estimate(value=value, method=MethodId(Setting.SINGLE, MethodCode(code)),
                    failed=failed, failure_reason=reason)


# ---------------------------------------------------------------- summaries

def test_summarize_oracle():
    s = summarize([_est(1.0), _est(2.0), _est(3.0)], truth=2.0)
    assert (s.n_reps, s.n_failed) == (3, 0)
    assert s.mean == pytest.approx(2.0, abs=1e-12)
    assert s.emp_se == pytest.approx(1.0, abs=1e-12)
    assert s.mcse_mean == pytest.approx(1.0 / math.sqrt(3.0), abs=1e-12)
    assert s.mcse_emp_se == pytest.approx(0.5, abs=1e-12)
    assert s.bias == pytest.approx(0.0, abs=1e-12)


def test_summarize_excludes_failures_but_counts_them():
    ests = [_est(1.0), _est(None, failed=True, reason="x"), _est(3.0)]
    s = summarize(ests, truth=0.0)
    assert (s.n_reps, s.n_failed) == (2, 1)
    assert s.mean == pytest.approx(2.0)
    assert s.bias == pytest.approx(2.0)


def test_summarize_needs_two_usable():
    with pytest.raises(InsufficientReplications):
        summarize([], truth=0.0)
    with pytest.raises(InsufficientReplications):
        summarize([_est(1.0), _est(None, failed=True, reason="x")], truth=0.0)


def test_summarize_rejects_mixed_methods():
    with pytest.raises(InvalidArgument):
        summarize([_est(1.0, "A1"), _est(2.0, "A2")], truth=0.0)


# ------------------------------------------------------------------ workers

def test_resolve_workers_explicit():
    assert resolve_workers(3) == 3
    with pytest.raises(InvalidArgument):
        resolve_workers(0)


def test_resolve_workers_env(monkeypatch):
    monkeypatch.setenv(WORKERS_ENV_VAR, "2")
    assert resolve_workers(None) == 2
    monkeypatch.setenv(WORKERS_ENV_VAR, "zero")
    with pytest.raises(InvalidArgument):
        resolve_workers(None)
    monkeypatch.setenv(WORKERS_ENV_VAR, "-1")
    with pytest.raises(InvalidArgument):
        resolve_workers(None)
    monkeypatch.delenv(WORKERS_ENV_VAR)
    assert resolve_workers(None) >= 1
    # explicit count beats the environment
    monkeypatch.setenv(WORKERS_ENV_VAR, "7")
    assert resolve_workers(4) == 4


def test_default_n():
    assert default_n(scenario("SS-1A", "binary")) == DEFAULT_N_SINGLE
    assert default_n(scenario("ITC-1A", "binary")) == DEFAULT_N_PER_STUDY


# ------------------------------------------------------------- replications

def test_run_replication_order_and_determinism():
    spec = scenario("SS-1A", "binary")
    ests = run_replication(spec, 200, seed=7, rep=3)
    assert [e.method.code.value for e in ests] == ["A1", "A2", "A3", "A4", "A5"]
    again = run_replication(spec, 200, seed=7, rep=3)
    assert [e.value for e in ests] == [e.value for e in again]
    other = run_replication(spec, 200, seed=7, rep=4)
    assert ests[0].value != other[0].value


def test_run_replication_itc():
    spec = scenario("ITC-1A", "binary")
    ests = run_replication(spec, 300, seed=7, rep=0)
    assert len(ests) == 5
    assert all(e.method.setting is Setting.ITC for e in ests)


def test_worker_count_does_not_change_results():
    spec = scenario("SS-1A", "binary")
    serial = run_scenario(spec, nsim=6, seed=99, n=150, workers=1, truth=1.0)
    pooled = run_scenario(spec, nsim=6, seed=99, n=150, workers=2, truth=1.0)
    for a, b in zip(serial, pooled):
        assert a.mean == b.mean
        assert a.emp_se == b.emp_se
        assert (a.n_reps, a.n_failed) == (b.n_reps, b.n_failed)


def test_run_scenario_accepts_float_or_result_truth():
    spec = scenario("SS-1A", "binary")
    by_float = run_scenario(spec, nsim=4, seed=1, n=120, workers=1, truth=0.25)
    assert all(s.truth == 0.25 for s in by_float)
    wrapped = TruthResult(0.25, 100_000, 0.0)
    by_result = run_scenario(spec, nsim=4, seed=1, n=120, workers=1, truth=wrapped)
    assert by_float[0].mean == by_result[0].mean
    assert by_float[0].bias == by_result[0].bias


def test_run_scenario_rejects_tiny_nsim():
    with pytest.raises(InvalidArgument):
        run_scenario(scenario("SS-1A", "binary"), nsim=1, seed=0, truth=0.0)


def test_run_scenario_dump(tmp_path):
    spec = scenario("SS-1A", "binary")
    path = tmp_path / "estimates.csv"
    run_scenario(spec, nsim=4, seed=2, n=120, workers=1, truth=1.0,
                 dump_path=path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("scenario,outcome,rep,method,value")
    assert len(lines) == 1 + 4 * 5
    assert lines[1].startswith("SS-1A,binary,0,A1,")
    # a second scenario appends under the same header
    run_scenario(scenario("SS-1B", "binary"), nsim=4, seed=2, n=120,
                 workers=1, truth=1.0, dump_path=path)
    lines = path.read_text().splitlines()
    assert len(lines) == 1 + 2 * 4 * 5


# ---------------------------------------------------------------- the cache

def test_truth_cache_computes_once_and_reloads(tmp_path, monkeypatch):
    calls = []

    def stub(spec, mc_size=1_000_000, seed=0):
        calls.append((spec.label, mc_size, seed))
        return TruthResult(0.5, max(mc_size, 100_000), 0.0)

    monkeypatch.setattr("collapse_lab.harness.true_value", stub)
    path = tmp_path / "truth.txt"
    cache = TruthCache(path)
    spec = scenario("SS-1A", "binary")
    assert cache.get_or_compute(spec, 1_000_000, 0) == 0.5
    # binary truths come from quadrature, so mc_size and seed are no-ops
    assert cache.get_or_compute(spec, 500_000, 9) == 0.5
    assert len(calls) == 1
    assert path.read_text().splitlines() == ["SS-1A binary 0 0 0.5"]

    reloaded = TruthCache(path)
    assert reloaded.get_or_compute(spec, 1_000_000, 0) == 0.5
    assert len(calls) == 1


def test_truth_cache_tte_keys_on_size_and_seed(tmp_path, monkeypatch):
    calls = []

    def stub(spec, mc_size=1_000_000, seed=0):
        calls.append(mc_size)
        return TruthResult(float(mc_size), max(mc_size, 100_000), 0.1)

    monkeypatch.setattr("collapse_lab.harness.true_value", stub)
    cache = TruthCache(tmp_path / "truth.txt")
    spec = scenario("SS-2A", "tte")
    assert cache.get_or_compute(spec, 200_000, 0) == 200_000.0
    assert cache.get_or_compute(spec, 300_000, 0) == 300_000.0
    assert cache.get_or_compute(spec, 200_000, 0) == 200_000.0
    assert calls == [200_000, 300_000]
