#!/usr/bin/env python3
"""Residual against N for the fixed sweep sets, with log-log slopes.

    python scripts/convergence_sweeps.py --out sweeps.csv
"""
from __future__ import annotations

import argparse
import csv
import sys

from arithsum import experiments


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--N", default=",".join(map(str, experiments.SWEEP_NS)), help="ascending N list")
    p.add_argument("--sets", default="poisson_generic,poisson_windowed,em_R3")
    p.add_argument("--out", help="CSV of residuals (default: none)")
    args = p.parse_args(argv)
    Ns = [int(v) for v in args.N.split(",")]
    sets = experiments.sweep_jobs()
    rows, ok = [], True
    for name in args.sets.split(","):
        limit, docs = sets[name]
        for i, doc in enumerate(docs):
            res = experiments.sweep_residuals(doc, Ns)
            slope = experiments.fit_slope(Ns, res) if min(res) > 0 else float("-inf")
            ok &= slope <= limit
            print(f"{name}[{i}] {doc['identity']:<20} slope {slope:7.3f} (limit {limit}) "
                  + " ".join(f"{r:.2e}" for r in res))
            rows += [[name, i, doc["identity"], doc["f"], N, repr(r), slope] for N, r in zip(Ns, res)]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["set", "job", "identity", "f", "N", "residual", "slope"])
            w.writerows(rows)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
