"""Built-in invariant suite, grouped, plus mutation switches used to show the suite bites."""
from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator

import numpy as np

from . import arith, formulae, jobgen, kernels, smoothfn
from .arith import PeriodicSequence
from .formulae import TruncationParams
from .jobs import Job, passes


@dataclass
class GroupResult:
    name: str
    passed: bool
    checks: int
    failures: list[str]


# ---------------------------------------------------------------------------
# mutations


def _flip_psi(original):
    def psi(r, x):
        return -original(r, x)
    return psi


def _conj_tau(original):
    def tau(chi, n):
        return np.conj(original(chi, n))
    return tau


def _drop_n0(original):
    def indices(N):
        n = original(N)
        return n[n != 0]
    return indices


MUTATIONS: dict[str, tuple[object, str, Callable]] = {
    "psi_sign": (kernels, "psi", _flip_psi),
    "tau_conj": (arith, "tau", _conj_tau),
    "drop_n0": (formulae, "_poisson_indices", _drop_n0),
}


@contextlib.contextmanager
def mutation(name: str | None) -> Iterator[None]:
    """Temporarily replace one building block with a deliberately wrong version."""
    if name is None:
        yield
        return
    module, attr, make = MUTATIONS[name]
    original = getattr(module, attr)
    setattr(module, attr, make(original))
    try:
        yield
    finally:
        setattr(module, attr, original)


# ---------------------------------------------------------------------------
# groups


class _Checks:
    def __init__(self):
        self.count = 0
        self.failures: list[str] = []

    def check(self, ok, label):
        self.count += 1
        if not ok:
            self.failures.append(label)

    def close(self, x, y, tol, label):
        try:
            ok = abs(complex(x) - complex(y)) <= tol
        except Exception as exc:  # a check that raises is a failure
            ok, label = False, f"{label} ({exc})"
        self.check(ok, label)


def _kernels(c: _Checks):
    c.check(kernels.bernoulli_numbers(4)[2] == Fraction(1, 6), "B_2 = 1/6")
    c.check(kernels.bernoulli_numbers(4)[4] == Fraction(-1, 30), "B_4 = -1/30")
    c.close(kernels.psi(0, 0.25), -0.25, 1e-15, "psi_0(0.25)")
    c.close(kernels.psi(0, 3.0), -0.5, 1e-15, "psi_0 at an integer")
    c.close(kernels.psi(1, 0.0), 1.0 / 12, 1e-15, "psi_1(0) = 1/12")
    rng = np.random.default_rng(7)
    xs = rng.uniform(-5, 5, 50)
    for r in range(1, 7):
        c.close(np.max(np.abs(kernels.psi(r, xs + 3) - kernels.psi(r, xs))), 0, 1e-13, f"psi_{r} periodic")
        h = 1e-5
        fd = (kernels.psi(r, xs + h) - kernels.psi(r, xs - h)) / (2 * h)
        away = np.abs(xs - np.round(xs)) > 1e-3
        c.close(np.max(np.abs(fd - kernels.psi(r - 1, xs))[away]), 0, 1e-8, f"psi_{r}' = psi_{r - 1}")
    for r in (1, 2, 3):
        x = 0.3
        c.close(kernels.psi_fourier_partial(r, x, 2000), kernels.psi(r, x), 1e-6, f"psi_{r} Fourier series")
    q = kernels.integrate(np.exp, 0.0, 1.0, 1e-13)
    c.close(q.value, math.e - 1, 1e-12, "integrate exp")
    F = kernels.fourier_integrals(lambda u: np.ones_like(u), 0.25, 5.25, 1.0, 5, 1e-13)
    c.close(F.at(0), 5.0, 1e-12, "transform n=0")
    c.close(np.max(np.abs(F.at(np.array([1, 2, -3])))), 0, 1e-12, "transform over whole periods")


def _smoothfn(c: _Checks):
    f = smoothfn.SmoothFunction.parse("x^3 - 2*x", -1, 2)
    c.close(f(1.5), 1.5**3 - 3, 1e-14, "evaluate")
    d = f.derivative_values(np.array(0.5), 3)
    c.close(d[1], 3 * 0.25 - 2, 1e-13, "first derivative")
    c.close(d[3], 6, 1e-12, "third derivative")
    g = smoothfn.SmoothFunction.parse("exp(sin(x))", 0, 3)
    c.close(g.derivative_values(np.array(1.0), 1)[1], math.cos(1) * math.exp(math.sin(1)), 1e-13, "chain rule")
    try:
        smoothfn.parse("log(")
        c.check(False, "truncated input rejected")
    except smoothfn.ParseError as exc:
        c.check(exc.offset == 4, "parse error offset")
    s = "sin(pi*x)^2/(1+x)"
    c.check(smoothfn.parse(smoothfn.to_source(smoothfn.parse(s))) == smoothfn.parse(s), "source round trip")


def _arith(c: _Checks):
    c.close(arith.tau(PeriodicSequence((1, 0, -1, 0)), 1), 2j, 1e-14, "tau, k=4")
    c.close(arith.tau(PeriodicSequence((1, -1)), 1), -2, 1e-14, "tau, k=2")
    chi = PeriodicSequence((0.3 + 1j, -1, 0.5j))
    c.close(arith.tau(chi, 7), arith.tau(chi, 1), 0, "tau periodic in n")
    c.check(int(arith.divisor_sieve(12).d[12]) == 6, "d(12) = 6")
    c.check(int(arith.divisor_sieve(10).d[1:].sum()) == 27, "sum d(n), n <= 10")
    c.check(list(arith.residues_in_class(3, 30, 2, 3, 2)) == [2, 5, 8, 11, 14], "residue class listing")
    c.close(arith.harmonic(10), 7381 / 2520, 1e-15, "H(10)")


def _collapses(c: _Checks):
    one = PeriodicSequence((1,))
    p = TruncationParams(R=3, N=200)
    for src, a, b in (("exp(-x/7)*cos(x/3)", 0.5, 12.5), ("sqrt(x+1)", 2.5, 9.5)):
        f = smoothfn.SmoothFunction.parse(src, a, b)
        rel = 1e-12 * (1 + abs(formulae.direct_sum("unit", None, f, a, b)))
        c.close(formulae.euler_maclaurin_chi(one, f, a, b, p).rhs, formulae.euler_maclaurin(f, a, b, p).rhs,
                rel, f"em k=1 [{src}]")
        c.close(formulae.poisson_chi(one, f, a, b, p).rhs, formulae.poisson(f, a, b, p).rhs, rel,
                f"poisson k=1 [{src}]")
        c.close(formulae.euler_maclaurin_divisor_chi(one, f, a, b, p).rhs,
                formulae.euler_maclaurin_divisor(f, a, b, p).rhs, rel * 10, f"em (III) k=1 [{src}]")
        c.close(formulae.poisson_divisor_chi(one, f, a, b, p).rhs, formulae.poisson_divisor(f, a, b, p).rhs,
                rel * 10, f"poisson (III) k=1 [{src}]")


DESK_JOBS = [
    {"identity": "abel", "f": "exp(-x)", "interval": ["0", "4"], "nodes": ["0.5", "1.5", "2.5", "3.5", "4.5"],
     "coeffs": [[1, 0], [-1, 0], [1, 0], [-1, 0], [1, 0]]},
    {"identity": "euler", "f": "x^2", "interval": ["0.5", "10.5"]},
    {"identity": "euler2d", "f": "x*y + exp(x/4)", "interval": ["0", "3"], "interval_y": ["1", "4"]},
    {"identity": "residue_class", "f": "cos(x/2)", "interval": ["0.5", "12.5"], "r": 1, "k": 4},
    {"identity": "dilated", "f": "x", "interval": ["0.5", "10.5"], "m": 2},
    {"identity": "dilated_residue", "f": "1/(1+x)", "interval": ["0.5", "20.5"], "r": 0, "k": 2, "m": 2},
    {"identity": "em_chi", "f": "exp(-x/5)", "interval": ["0.3", "40.3"], "chi": [[1, 0], [0, 0], [-1, 0], [0, 0]],
     "truncation": {"R": 3, "N": 200}, "tolerance": "1e-8"},
    {"identity": "em_divisor", "f": "sin(x/4)", "interval": ["0.5", "15.5"], "truncation": {"R": 3, "N": 300}},
    {"identity": "em_divisor_chi", "f": "exp(-x/9)", "interval": ["0.5", "12.5"],
     "chi": [[1, 0], [0, 1], [0.5, -0.5]], "truncation": {"R": 3, "N": 300}},
    {"identity": "poisson_chi", "f": "sin(pi*(x-0.5)/12)^2", "interval": ["0.5", "12.5"],
     "chi": [[0.2, 0.9], [-1, 0], [0, 0]], "truncation": {"N": 1000}},
    {"identity": "poisson_divisor", "f": "x*sin(pi*(x-0.5)/10)^2", "interval": ["0.5", "10.5"],
     "truncation": {"N": 1000}},
    {"identity": "poisson_divisor_chi", "f": "exp(-x/4)*sin(pi*(x-0.5)/10)^2", "interval": ["0.5", "10.5"],
     "chi": [[1, 0], [0, -1], [0.5, 0.5]], "truncation": {"N": 1000}},
]


def _oracles(c: _Checks, workers: int = 1):
    for doc in DESK_JOBS:
        job = Job.from_doc(doc)
        try:
            res = job.run(workers)
            c.check(passes(res, job.tolerance), f"{doc['identity']}: residual {res.residual:.3g}")
        except Exception as exc:
            c.check(False, f"{doc['identity']}: {type(exc).__name__}: {exc}")
    for ident in jobgen.EM_FAMILY + jobgen.POISSON_FAMILY:
        for doc in jobgen.battery(ident, count=2):
            if ident in jobgen.POISSON_FAMILY:
                doc["truncation"]["N"] = 1000
            res = Job.from_doc(doc).run(workers)
            tol = 1e-6 if ident in jobgen.EM_FAMILY else 1e-4
            c.check(passes(res, tol), f"{ident} random job: residual {res.residual:.3g}")


GROUPS: dict[str, Callable] = {
    "kernels": _kernels,
    "smoothfn": _smoothfn,
    "arith": _arith,
    "collapses": _collapses,
    "oracles": _oracles,
}


def run_group(name: str, workers: int = 1) -> GroupResult:
    c = _Checks()
    try:
        if name == "oracles":
            _oracles(c, workers)
        else:
            GROUPS[name](c)
    except Exception as exc:
        c.check(False, f"raised {type(exc).__name__}: {exc}")
    return GroupResult(name, not c.failures, c.count, c.failures)


def run_all(workers: int = 1) -> list[GroupResult]:
    return [run_group(name, workers) for name in GROUPS]
