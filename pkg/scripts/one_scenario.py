#!/usr/bin/env python3
"""Library-level walkthrough: one scenario end to end, summaries printed.

Shows the pieces the command line wires together: the scenario registry,
the truth oracle, and the replication harness.

    python3 scripts/one_scenario.py SS-2A binary --nsim 500
"""

import argparse

from collapse_lab.harness import run_scenario
from collapse_lab.synth import scenario
from collapse_lab.truth import true_value


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("label", help="scenario label, e.g. SS-2A or ITC-3B")
    parser.add_argument("outcome", choices=["binary", "tte"])
    parser.add_argument("--nsim", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    spec = scenario(args.label, args.outcome)
    truth = true_value(spec, seed=args.seed)
    print(f"{spec.label} / {spec.outcome.value}: true marginal effect "
          f"{truth.value:.4f} (mc hint {truth.mc_se_hint:.4f})")

    summaries = run_scenario(spec, nsim=args.nsim, seed=args.seed, truth=truth)
    print(f"{'method':28s} {'mean':>8s} {'empSE':>8s} {'bias':>8s} "
          f"{'mcse':>8s} {'failed':>6s}")
    for s in summaries:
        print(f"{s.method.name:28s} {s.mean:8.4f} {s.emp_se:8.4f} "
              f"{s.bias:+8.4f} {s.mcse_mean:8.4f} {s.n_failed:6d}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
