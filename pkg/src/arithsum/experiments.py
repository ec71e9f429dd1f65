"""Battery runs, convergence sweeps and the fixed sweep job sets.

Shared by the acceptance tests and the scripts in ``scripts/``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import jobgen
from .jobgen import EM_FAMILY, POISSON_FAMILY, BatteryConfig
from .jobs import Job

SWEEP_NS = (100, 1000, 10000)
SWEEP_SEED = 20240918
SWEEP_QUAD_TOL = "1e-14"


@dataclass(frozen=True)
class JobOutcome:
    identity: str
    index: int
    residual: float
    lhs_abs: float
    converged: bool
    seconds: float
    error: str | None = None

    @property
    def relative(self) -> float:
        """residual / (1 + |lhs|); infinite when the job raised."""
        return math.inf if self.error else self.residual / (1 + self.lhs_abs)


@dataclass(frozen=True)
class IdentitySummary:
    identity: str
    jobs: int
    within_tol: int
    within_worst: int
    worst_relative: float
    nonconverged: int
    errors: int
    seconds: float
    passed: bool

    def line(self) -> str:
        return (f"{self.identity:<20} jobs={self.jobs} within_tol={self.within_tol} "
                f"within_worst={self.within_worst} worst_rel={self.worst_relative:.2e} "
                f"nonconverged={self.nonconverged} errors={self.errors} {self.seconds:.1f}s "
                f"{'PASS' if self.passed else 'FAIL'}")


def run_job(doc: dict, identity: str = "", index: int = 0, workers: int = 1) -> JobOutcome:
    t0 = time.perf_counter()
    try:
        res = Job.from_doc(doc).run(workers)
    except Exception as exc:  # a raising job is a failed job
        return JobOutcome(identity, index, math.inf, math.inf, False, time.perf_counter() - t0,
                          f"{type(exc).__name__}: {exc}")
    return JobOutcome(identity, index, res.residual, abs(res.lhs), res.converged, time.perf_counter() - t0)


def run_battery(cfg: BatteryConfig = BatteryConfig(), identities: Iterable[str] = EM_FAMILY + POISSON_FAMILY,
                count: int | None = None, workers: int = 1,
                progress: Callable[[JobOutcome], None] | None = None) -> list[JobOutcome]:
    out = []
    for identity in identities:
        for i, doc in enumerate(jobgen.battery(identity, cfg, count)):
            o = run_job(doc, identity, i, workers)
            out.append(o)
            if progress:
                progress(o)
    return out


def job_fails(o: JobOutcome, cfg: BatteryConfig = BatteryConfig()) -> bool:
    """Per-job failure: above the family's every-job bound, or above em_tol for E-M jobs."""
    tol = cfg.em_tol if o.identity in EM_FAMILY else cfg.poisson_tol
    return not o.relative <= tol


def summarize(outcomes: list[JobOutcome], cfg: BatteryConfig = BatteryConfig()) -> list[IdentitySummary]:
    rows = []
    for identity in dict.fromkeys(o.identity for o in outcomes):
        group = [o for o in outcomes if o.identity == identity]
        rel = np.array([o.relative for o in group])
        if identity in EM_FAMILY:
            tol, worst, quantile = cfg.em_tol, cfg.em_worst, cfg.em_quantile
        else:
            tol, worst, quantile = cfg.poisson_tol, cfg.poisson_tol, 1.0
        within_tol = int(np.sum(rel <= tol))
        within_worst = int(np.sum(rel <= worst))
        passed = within_tol >= quantile * len(group) and within_worst == len(group)
        rows.append(IdentitySummary(
            identity, len(group), within_tol, within_worst, float(rel.max()),
            sum(not o.converged for o in group), sum(o.error is not None for o in group),
            sum(o.seconds for o in group), bool(passed)))
    return rows


def subsample(cfg: BatteryConfig = BatteryConfig(), size: int = 20,
              identities: tuple[str, ...] = EM_FAMILY + POISSON_FAMILY) -> list[tuple[str, dict]]:
    """Round-robin over identities through the head of each battery."""
    per = -(-size // len(identities))
    lists = {i: jobgen.battery(i, cfg, per) for i in identities}
    picked = [(i, lists[i][j]) for j in range(per) for i in identities]
    return picked[:size]


# ---------------------------------------------------------------------------
# convergence sweeps


def sweep_residuals(doc: dict, Ns: Iterable[int] = SWEEP_NS) -> list[float]:
    job = Job.from_doc(doc)
    return [job.with_N(int(N)).run().residual for N in Ns]


def fit_slope(Ns, residuals) -> float:
    """Least-squares slope of log residual against log N."""
    return float(np.polyfit(np.log(np.asarray(Ns, float)), np.log(np.asarray(residuals, float)), 1)[0])


def _chi(rng, k: int) -> list[list[float]]:
    v = np.round(rng.uniform(-1, 1, size=(k, 2)), 3)
    return [[float(x), float(y)] for x, y in v]


def _with_tol(doc: dict, **trunc) -> dict:
    doc["truncation"] = {"quad_tol": SWEEP_QUAD_TOL, **trunc}
    return doc


def sweep_jobs() -> dict[str, tuple[float, list[dict]]]:
    """Fixed sweep sets, each with its slope limit.

    Generic Poisson jobs keep every period p small enough that N mod 2p is the
    same for N in {10^2, 10^3, 10^4}, so the oscillating tail has one phase over
    the sweep.  The E-M set uses the longest periods in range (k = 6, b = 40.5):
    boundary and remainder terms there reach ~1e4 and cancel, which puts the
    roundoff floor near 1e-11, and the residual at N = 100 must sit about eight
    decades above it for an N^-4 law to be visible.
    """
    rng = np.random.default_rng(SWEEP_SEED)
    generic = []
    for k, f in zip(range(1, 7), ("exp(-x/9)+x/7", "cos(x/3)", "x^2/50-x/4", "log(x+1)", "sqrt(x+2)",
                                  "1/(1+x/10)")):
        generic.append(_with_tol({"identity": "poisson_chi", "f": f, "interval": ["0.5", "20.5"],
                                  "chi": _chi(rng, k)}))
    for f in ("exp(-x/9)", "cos(x/3)+x/5"):
        generic.append(_with_tol({"identity": "poisson_divisor", "f": f, "interval": ["0.5", "3.5"]}))
    for k, f in ((2, "exp(-x/9)"), (3, "log(x+1)")):
        generic.append(_with_tol({"identity": "poisson_divisor_chi", "f": f, "interval": ["0.5", "3.5"],
                                  "chi": _chi(rng, k)}))

    windowed = []
    specs = [("poisson_chi", 2, ("0.5", "20.5")), ("poisson_chi", 3, ("1.5", "30.5")),
             ("poisson_chi", 4, ("0.5", "40.5")), ("poisson_chi", 6, ("2.5", "25.5")),
             ("poisson_divisor", None, ("0.5", "20.5")), ("poisson_divisor", None, ("0.5", "30.5")),
             ("poisson_divisor", None, ("3.5", "15.5")), ("poisson_divisor_chi", 2, ("0.5", "20.5")),
             ("poisson_divisor_chi", 3, ("0.5", "15.5")), ("poisson_divisor_chi", 4, ("1.5", "12.5"))]
    for i, (identity, k, (a, b)) in enumerate(specs):
        base = ("exp(-x/9)", "cos(x/3)+2", "x/10+1")[i % 3]
        doc = {"identity": identity, "f": f"({base})*{jobgen.window(a, b)}", "interval": [a, b]}
        if k:
            doc["chi"] = _chi(rng, k)
        windowed.append(_with_tol(doc))

    em = []
    for _ in range(10):
        w, p = round(float(rng.uniform(0.8, 1.4)), 2), round(float(rng.uniform(0, 3)), 2)
        em.append(_with_tol({"identity": "em_divisor_chi", "f": f"cos({w}*x+{p})*exp(-x/40)",
                             "interval": ["0.5", "40.5"], "chi": _chi(rng, 6)}, R=3))
    return {"poisson_generic": (-0.9, generic), "poisson_windowed": (-1.8, windowed), "em_R3": (-3.5, em)}
