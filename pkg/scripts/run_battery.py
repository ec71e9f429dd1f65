#!/usr/bin/env python3
"""Run the randomized oracle-equivalence battery and write per-job residuals.

    python scripts/run_battery.py --count 200 --out battery.csv
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time

from arithsum import experiments
from arithsum.jobgen import EM_FAMILY, POISSON_FAMILY, BatteryConfig

log = logging.getLogger("battery")


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--count", type=int, default=BatteryConfig.jobs_per_identity, help="jobs per identity")
    p.add_argument("--seed", type=int, default=BatteryConfig.seed)
    p.add_argument("--identities", default=",".join(EM_FAMILY + POISSON_FAMILY), help="comma-separated")
    p.add_argument("--threads", type=int, default=1, help="workers inside divisor identities")
    p.add_argument("--out", help="CSV of per-job results (default: none)")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)

    cfg = BatteryConfig(jobs_per_identity=args.count, seed=args.seed)
    done = [0]

    def progress(o):
        done[0] += 1
        if done[0] % 50 == 0:
            log.info("%d jobs", done[0])

    t0 = time.perf_counter()
    outcomes = experiments.run_battery(cfg, args.identities.split(","), workers=args.threads, progress=progress)
    log.info("total %.1fs", time.perf_counter() - t0)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["identity", "index", "residual", "abs_lhs", "relative", "converged", "seconds", "error"])
            for o in outcomes:
                w.writerow([o.identity, o.index, repr(o.residual), repr(o.lhs_abs), repr(o.relative),
                            o.converged, f"{o.seconds:.3f}", o.error or ""])
    rows = experiments.summarize(outcomes, cfg)
    for row in rows:
        print(row.line())
    return 0 if all(r.passed for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
