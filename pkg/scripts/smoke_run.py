#!/usr/bin/env python3
"""Reduced-scale pass over all scenarios, roughly ten minutes serial.

Means wobble at the second decimal at this replication count; the point
is exercising every scenario, method, and output path after an install,
not precision. Raw per-replication estimates are dumped as well.
"""

import sys

from collapse_lab.cli import main

DEFAULTS = ["--nsim", "100", "--out-dir", "results-smoke", "--dump-estimates"]

if __name__ == "__main__":
    sys.exit(main(DEFAULTS + sys.argv[1:]))
