"""Command line entry point.

Runs any subset of the registered scenarios and writes summary tables.
Options come from flags, optionally layered over a ``key = value`` config
file (``#`` starts a comment); flags win over the file, the file wins over
defaults. The CSV output has one row per (scenario, outcome, method) with a
fixed 12-column schema; the markdown output arranges the same numbers as
one table per design and outcome with methods across the columns.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import CollapseLabError, InvalidArgument
from .harness import PerfSummary, TruthCache, run_scenario
from .synth import SCENARIO_LABELS, Design, Outcome, ScenarioSpec, scenario

CSV_COLUMNS = (
    "scenario", "outcome", "method", "n_reps", "n_failed", "truth", "mean",
    "mcse_mean", "emp_se", "mcse_emp_se", "bias", "flagged",
)
FLAG_THRESHOLD = 0.1  # absolute bias considered materially biased


@dataclass(frozen=True)
class RunConfig:
    scenarios: tuple[str, ...] = ("all",)
    outcome: str = "both"
    nsim: int = 10_000
    n: int | None = None
    seed: int = 0
    truth_mc_size: int = 1_000_000
    workers: int | None = None
    out_dir: str = "results"
    format: str = "both"
    dump_estimates: bool = False


_DEFAULTS = RunConfig()
_FILE_KEYS = {
    "scenarios", "outcome", "nsim", "n", "seed", "truth_mc_size",
    "workers", "out_dir", "format", "dump_estimates",
}


def expand_scenarios(tokens) -> tuple[str, ...]:
    """Resolve labels plus the all / all-ss / all-itc shorthands, keeping order."""
    out: list[str] = []
    for token in tokens:
        t = token.strip().upper().replace("_", "-")
        if t == "ALL":
            out.extend(SCENARIO_LABELS)
        elif t == "ALL-SS":
            out.extend(s for s in SCENARIO_LABELS if s.startswith("SS-"))
        elif t == "ALL-ITC":
            out.extend(s for s in SCENARIO_LABELS if s.startswith("ITC-"))
        elif t in SCENARIO_LABELS:
            out.append(t)
        else:
            raise InvalidArgument(f"unknown scenario {token!r}")
    seen = set()
    unique = [s for s in out if not (s in seen or seen.add(s))]
    if not unique:
        raise InvalidArgument("no scenarios requested")
    return tuple(unique)


def _parse_file(path: str) -> dict:
    values: dict = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgument(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key not in _FILE_KEYS:
            raise InvalidArgument(f"{path}:{lineno}: unknown key {key!r}")
        if key == "scenarios":
            values[key] = tuple(v for v in value.split(",") if v.strip())
        elif key in ("nsim", "n", "seed", "truth_mc_size", "workers"):
            values[key] = int(value)
        elif key == "dump_estimates":
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise InvalidArgument(f"{path}:{lineno}: boolean expected")
            values[key] = value.lower() in ("true", "1", "yes")
        else:
            values[key] = value
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="collapse-lab",
        description="Compare weighting and standardization estimators of "
        "marginal odds and hazard ratios on synthetic scenarios.",
    )
    parser.add_argument("--config", metavar="FILE", help="key = value defaults file")
    parser.add_argument(
        "--scenarios",
        help="comma-separated labels (SS-2A,ITC-3B,...) or all, all-ss, all-itc",
    )
    parser.add_argument("--outcome", choices=["binary", "tte", "both"])
    parser.add_argument("--nsim", type=int, help="replications per scenario")
    parser.add_argument("--n", type=int, help="cohort size (per trial in the two-trial design)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--truth-mc-size", type=int, dest="truth_mc_size")
    parser.add_argument("--workers", type=int, help="processes; COLLAPSE_LAB_WORKERS else all cores")
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--format", choices=["csv", "markdown", "both"])
    parser.add_argument(
        "--dump-estimates", action="store_true", default=None,
        help="also write every raw replication estimate",
    )
    return parser


def parse_config(argv=None) -> RunConfig:
    """Merge defaults, optional config file, and flags into a RunConfig."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    config = _DEFAULTS
    try:
        if args.config:
            config = replace(config, **_parse_file(args.config))
        overrides = {}
        for key in _FILE_KEYS:
            if key == "scenarios":
                continue
            value = getattr(args, key)
            if value is not None:
                overrides[key] = value
        if args.scenarios is not None:
            overrides["scenarios"] = tuple(args.scenarios.split(","))
        config = replace(config, **overrides)
        config = replace(config, scenarios=expand_scenarios(config.scenarios))
    except (InvalidArgument, OSError, ValueError) as err:
        parser.error(str(err))
    if config.nsim < 2:
        parser.error("nsim must be at least 2")
    if config.n is not None and config.n < 2:
        parser.error("n must be at least 2")
    return config


def _outcomes(choice: str) -> list[Outcome]:
    if choice == "binary":
        return [Outcome.BINARY]
    if choice == "tte":
        return [Outcome.TTE]
    return [Outcome.BINARY, Outcome.TTE]


def _flagged(summary: PerfSummary) -> bool:
    return abs(summary.bias) > FLAG_THRESHOLD


def emit_csv(path: Path, results: list[tuple[ScenarioSpec, list[PerfSummary]]]):
    lines = [",".join(CSV_COLUMNS)]
    for spec, summaries in results:
        for s in summaries:
            lines.append(",".join([
                spec.label,
                spec.outcome.value,
                s.method.code.value,
                str(s.n_reps),
                str(s.n_failed),
                f"{s.truth:.6f}",
                f"{s.mean:.6f}",
                f"{s.mcse_mean:.6f}",
                f"{s.emp_se:.6f}",
                f"{s.mcse_emp_se:.6f}",
                f"{s.bias:.6f}",
                str(int(_flagged(s))),
            ]))
    path.write_text("\n".join(lines) + "\n")


_GROUP_TITLES = {
    (Design.SINGLE, Outcome.TTE): "Single study, marginal log hazard ratio",
    (Design.SINGLE, Outcome.BINARY): "Single study, marginal log odds ratio",
    (Design.ITC, Outcome.TTE): "Anchored comparison, marginal log hazard ratio",
    (Design.ITC, Outcome.BINARY): "Anchored comparison, marginal log odds ratio",
}


def emit_markdown(path: Path, results: list[tuple[ScenarioSpec, list[PerfSummary]]]):
    chunks: list[str] = ["# Simulation results", ""]
    for group, title in _GROUP_TITLES.items():
        rows = [(spec, ss) for spec, ss in results
                if (spec.design, spec.outcome) == group]
        if not rows:
            continue
        codes = [s.method.code.value for s in rows[0][1]]
        chunks.append(f"## {title}")
        chunks.append("")
        chunks.append("| scenario | truth | " + " | ".join(codes) + " |")
        chunks.append("|" + "---|" * (len(codes) + 2))
        max_mcse = 0.0
        for spec, summaries in rows:
            cells = []
            for s in summaries:
                mean = f"**{s.mean:.3f}**" if _flagged(s) else f"{s.mean:.3f}"
                cells.append(f"{mean} / {s.emp_se:.3f}")
                max_mcse = max(max_mcse, s.mcse_mean)
            chunks.append(
                f"| {spec.label} | {summaries[0].truth:.3f} | " + " | ".join(cells) + " |"
            )
        chunks.append("")
        chunks.append(
            "Cell format: mean / empirical SE across replications; bold means "
            f"absolute bias above {FLAG_THRESHOLD:g}. Largest Monte Carlo SE of "
            f"any mean in this table: {max_mcse:.4f}."
        )
        chunks.append("")
    path.write_text("\n".join(chunks))


def main(argv=None) -> int:
    config = parse_config(argv)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache = TruthCache(out_dir / "truth_cache.txt")
    dump_path = out_dir / "estimates.csv" if config.dump_estimates else None
    if dump_path is not None and dump_path.exists():
        dump_path.unlink()

    results: list[tuple[ScenarioSpec, list[PerfSummary]]] = []
    errors: list[str] = []
    for label in config.scenarios:
        for outcome in _outcomes(config.outcome):
            spec = scenario(label, outcome)
            tag = f"{label}/{outcome.value}"
            try:
                truth = cache.get_or_compute(spec, config.truth_mc_size, config.seed)
                summaries = run_scenario(
                    spec,
                    nsim=config.nsim,
                    seed=config.seed,
                    n=config.n,
                    workers=config.workers,
                    truth=truth,
                    dump_path=dump_path,
                )
            except (CollapseLabError, OSError) as err:
                errors.append(f"{tag}: {err}")
                print(f"[collapse-lab] {tag} FAILED: {err}", file=sys.stderr)
                continue
            results.append((spec, summaries))
            worst = max(abs(s.bias) for s in summaries)
            print(
                f"[collapse-lab] {tag}: {config.nsim} replications done, "
                f"max |bias| {worst:.3f}",
                file=sys.stderr,
            )

    if results:
        if config.format in ("csv", "both"):
            emit_csv(out_dir / "results.csv", results)
        if config.format in ("markdown", "both"):
            emit_markdown(out_dir / "results.md", results)
    return 1 if errors else 0


if __name__ == "__main__":
    sys.exit(main())
