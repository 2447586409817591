#!/usr/bin/env python3
"""Full-scale rerun of every scenario table.

At 10000 replications per scenario this is an overnight job on one core;
the survival standardization dominates. Any collapse-lab flag can be
appended and overrides the defaults below, e.g.

    python3 scripts/reproduce_tables.py --scenarios all-ss --outcome binary
"""

import sys

from collapse_lab.cli import main

DEFAULTS = ["--nsim", "10000", "--out-dir", "results-full"]

if __name__ == "__main__":
    sys.exit(main(DEFAULTS + sys.argv[1:]))
