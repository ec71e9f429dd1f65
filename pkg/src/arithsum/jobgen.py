"""Random job generator for the oracle-equivalence battery.

Summands come from a small grammar of smooth, positive-domain building blocks::

    f      = summand , [ "+" , summand ] ;
    summand = coeff , "*" , factor , [ "*" , factor ] ;
    factor = "x/s" | "(x/s)^2" | "exp(-x/s)" | "exp(x/S)" | "sin(w*x+p)" | "cos(w*x+p)"
           | "log(x+c)" | "1/(x+c)" | "sqrt(x+c)" ;

with scales chosen so that f and its first few derivatives stay O(1) on
(0, 50].  Intervals are drawn from the half-integer grid, which never puts an
endpoint on a jump of any psi kernel.  Poisson jobs are multiplied by the
window sin(pi (x - a)/(b - a))^2, which vanishes to second order at both ends.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

EM_FAMILY = ("em_chi", "em_divisor", "em_divisor_chi")
POISSON_FAMILY = ("poisson_chi", "poisson_divisor", "poisson_divisor_chi")
CHI_IDENTITIES = ("em_chi", "em_divisor_chi", "poisson_chi", "poisson_divisor_chi")


@dataclass(frozen=True)
class BatteryConfig:
    jobs_per_identity: int = 200
    seed: int = 20240917
    b_max: float = 50.0
    k_max: int = 6
    R_choices: tuple[int, ...] = (2, 3, 4)
    em_N: int = 500
    poisson_N: int = 4000
    quad_tol: float = 1e-12
    em_tol: float = 1e-6  # met by >= em_quantile of E-M jobs
    em_quantile: float = 0.99
    em_worst: float = 1e-4  # met by every E-M job
    poisson_tol: float = 1e-4  # met by every Poisson job


def _num(rng, lo, hi, digits=3) -> str:
    return f"{round(float(rng.uniform(lo, hi)), digits):g}"


def _factor(rng) -> str:
    kind = rng.integers(9)
    if kind == 0:
        return "x/" + _num(rng, 10, 40)
    if kind == 1:
        return f"(x/{_num(rng, 15, 50)})^2"
    if kind == 2:
        return f"exp(-x/{_num(rng, 4, 20)})"
    if kind == 3:
        return f"exp(x/{_num(rng, 20, 50)})"
    if kind == 4:
        return f"sin({_num(rng, 0.05, 0.8)}*x+{_num(rng, 0, 3)})"
    if kind == 5:
        return f"cos({_num(rng, 0.05, 0.8)}*x+{_num(rng, 0, 3)})"
    if kind == 6:
        return f"log(x+{_num(rng, 1, 5)})"
    if kind == 7:
        return f"1/(x+{_num(rng, 1, 5)})"
    return f"sqrt(x+{_num(rng, 1, 5)})"


def random_function(rng) -> str:
    summands = []
    for _ in range(rng.integers(1, 3)):
        factors = [_factor(rng) for _ in range(rng.integers(1, 3))]
        summands.append(_num(rng, -2, 2, 2) + "*" + "*".join(factors))
    return "+".join(summands).replace("+-", "-")


def random_interval(rng, b_max: float) -> tuple[str, str]:
    grid = np.arange(0.5, b_max, 1.0)
    a, b = sorted(rng.choice(grid, size=2, replace=False))
    return f"{a:g}", f"{b:g}"


def random_chi(rng, k_max: int) -> list[list[float]]:
    k = int(rng.integers(1, k_max + 1))
    if rng.random() < 0.5:
        # values from {0, +-1, +-i}
        pool = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)]
        return [list(pool[i]) for i in rng.integers(len(pool), size=k)]
    re = np.round(rng.uniform(-1, 1, size=k), 3)
    im = np.round(rng.uniform(-1, 1, size=k), 3)
    return [[float(x), float(y)] for x, y in zip(re, im)]


def window(a: str, b: str) -> str:
    return f"sin(pi*(x-{a})/({b}-{a}))^2"


def random_job(rng, identity: str, cfg: BatteryConfig = BatteryConfig()) -> dict:
    a, b = random_interval(rng, cfg.b_max)
    f = random_function(rng)
    job: dict = {"identity": identity, "interval": [a, b]}
    if identity in POISSON_FAMILY:
        job["f"] = f"({f})*{window(a, b)}"
        job["truncation"] = {"N": cfg.poisson_N, "quad_tol": repr(cfg.quad_tol)}
    else:
        job["f"] = f
        R = int(rng.choice(cfg.R_choices))
        job["truncation"] = {"R": R, "N": cfg.em_N, "quad_tol": repr(cfg.quad_tol)}
    if identity in CHI_IDENTITIES:
        job["chi"] = random_chi(rng, cfg.k_max)
    return job


def battery(identity: str, cfg: BatteryConfig = BatteryConfig(), count: int | None = None) -> list[dict]:
    """Deterministic list of jobs for one identity (seeded per identity)."""
    salt = zlib.crc32(identity.encode())
    rng = np.random.default_rng([cfg.seed, salt])
    n = cfg.jobs_per_identity if count is None else count
    return [random_job(rng, identity, cfg) for _ in range(n)]
