"""Command line front end.

    arithsum verify JOB.json [--tolerance C] [--threads T] [--timing]
    arithsum sweep JOB.json [--N 100,1000,10000] [--threads T]
    arithsum selftest [--mutation NAME]

Exit codes: 0 pass, 1 residual above tolerance or quadrature not converged,
2 invalid job or usage, 3 input rejected by a guard.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time

from . import jobs, selftest
from .arith import GuardError
from .jobs import Job, JobError
from .kernels import CapacityError
from .smoothfn import DomainError, ParseError

log = logging.getLogger("arithsum")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_GUARD = 0, 1, 2, 3


def _emit(obj) -> None:
    sys.stdout.write(jobs.dumps(obj) + "\n")


def _workers(threads: int) -> int:
    return (os.cpu_count() or 1) if threads == 0 else threads


def _load(path: str) -> Job:
    job = Job.load(path)
    # parse f early so expression errors are reported against $.f
    try:
        job.function()
    except ParseError as exc:
        raise JobError("$.f", str(exc)) from exc
    except DomainError as exc:
        raise JobError("$.f", f"not defined on the interval: {exc}") from exc
    return job


def _guarded(fn):
    """Map the error taxonomy onto exit codes with a machine-readable payload."""
    try:
        return fn()
    except JobError as exc:
        log.error("invalid job: %s", exc)
        _emit({"error": "schema", "path": exc.path, "message": exc.message})
        return EXIT_USAGE
    except GuardError as exc:
        log.error("rejected: %s", exc)
        _emit({"error": "guard", "guard": exc.guard, "detail": exc.detail})
        return EXIT_GUARD
    except CapacityError as exc:
        log.error("rejected: %s", exc)
        _emit({"error": "guard", "guard": "sieve capacity", "detail": str(exc)})
        return EXIT_GUARD


def cmd_verify(args) -> int:
    def run():
        job = _load(args.job)
        c = args.tolerance if args.tolerance is not None else job.tolerance
        result, ms = jobs.timed_run(job, _workers(args.threads))
        _emit(jobs.report(job, result, c, ms if args.timing else None))
        ok = jobs.passes(result, c)
        log.info("%s residual %.3e (%s)", job.identity, result.residual, "pass" if ok else "FAIL")
        return EXIT_OK if ok else EXIT_FAIL

    return _guarded(run)


def _parse_N(text: str | None, job: Job) -> list[int]:
    if text is None:
        values = job.doc.get("sweep")
        if values is None:
            raise JobError("$.sweep", "no N values: give --N or a sweep list in the job")
        return list(values)
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise JobError("--N", f"not a comma-separated list of integers: {text!r}") from exc
    if not values:
        raise JobError("--N", "empty N list")
    if any(v < 1 for v in values) or values != sorted(values):
        raise JobError("--N", "N values must be positive and ascending")
    return values


def cmd_sweep(args) -> int:
    def run():
        job = _load(args.job)
        Ns = _parse_N(args.N, job)
        out = csv.writer(sys.stdout, lineterminator="\n")
        out.writerow(["N", "residual", "tail_estimate", "wall_ms"])
        for N in Ns:
            res, ms = jobs.timed_run(job.with_N(N), _workers(args.threads))
            out.writerow([N, jobs.fmt(res.residual), jobs.fmt(res.diagnostics.tail_estimate), jobs.fmt(ms)])
            sys.stdout.flush()
        return EXIT_OK

    return _guarded(run)


def cmd_selftest(args) -> int:
    ok = True
    with selftest.mutation(args.mutation):
        for name in selftest.GROUPS:
            t0 = time.perf_counter()
            g = selftest.run_group(name, _workers(args.threads))
            ok &= g.passed
            status = "PASS" if g.passed else "FAIL"
            print(f"{status} {name} ({g.checks} checks, {time.perf_counter() - t0:.1f} s)")
            for msg in g.failures:
                print(f"    failed: {msg}")
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="arithsum", description="Check weighted summation identities against direct sums.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="evaluate one job and report lhs, rhs and residual as JSON")
    v.add_argument("job")
    v.add_argument("--tolerance", type=float, help="pass if residual <= C (1 + |lhs|); default 1e-6 or the job's value")
    v.add_argument("--threads", type=int, default=1, help="worker threads for divisor identities (0 = auto)")
    v.add_argument("--timing", action="store_true", help="include wall_ms in the report")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="residual and tail estimate for several N, as CSV")
    s.add_argument("job")
    s.add_argument("--N", help="comma-separated ascending list, e.g. 100,1000,10000")
    s.add_argument("--threads", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("selftest", help="run the built-in invariant groups")
    t.add_argument("--mutation", choices=sorted(selftest.MUTATIONS), help="run with a deliberately broken building block")
    t.add_argument("--threads", type=int, default=1)
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, which matches our code
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    if getattr(args, "threads", 1) < 0:
        _emit({"error": "schema", "path": "--threads", "message": "must be >= 0"})
        return EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
