"""Two-sided evaluators for the weighted summation identities.

Every evaluator returns an :class:`IdentityResult` whose ``lhs`` is the direct
sum over the integers in ``(a, b]`` and whose ``rhs`` is the closed formula,
assembled stage by stage (main term, boundary terms, truncated series).

All identities descend from one device.  For a residue class mod ``k`` of
multiples of ``m`` the generalised Euler formula reads

    sum_{a/m<n<=b/m, n=r (k)} f(mn) = (1/km) int f + int psi(arg u) f'(u) du
                                     + f(a) psi(arg a) - f(b) psi(arg b),
    arg u = (u/m - r)/k,

and the Euler-Maclaurin variants integrate ``psi(arg u) f'(u)`` by parts
``R`` times (each step contributes a factor ``mk``), while the Poisson
variants expand psi in its Fourier series and integrate by parts once.
Boundary series are summed in closed form with ``psi_r``; only remainder and
Poisson series are truncated at ``|n| <= N``, with +n and -n paired.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import arith, kernels
from .arith import GuardError, PeriodicSequence, near_integer
from .smoothfn import BivariateFunction, SmoothFunction, is_good_on

TWO_PI = 2.0 * math.pi

WEIGHTS = ("unit", "chi", "divisor", "divisor_chi")
MAX_TENSOR_NODES = 2**22

# guard names, also used by the command line
G_PSI_INTEGER = "integer psi-argument at endpoint"
G_TIE = "interval tie"
G_NOT_GOOD = "non-good function"
G_NODE = "node at endpoint"
G_CORNER = "non-integer corner"
G_ORDER = "derivative order exceeds max_order"
G_RESIDUE = "residue outside 0 <= r < k"
G_DIVISOR_DOMAIN = "divisor sums need a >= 0"
G_DOMAIN = "interval outside the domain of f"
G_SIEVE = "sieve capacity"
G_INTERVAL = "empty interval"


@dataclass(frozen=True)
class TruncationParams:
    R: int = 2
    N: int = 100
    quad_tol: float = 1e-12

    def __post_init__(self):
        if self.R < 0 or self.N < 1 or not self.quad_tol > 0:
            raise ValueError("need R >= 0, N >= 1 and quad_tol > 0")


@dataclass
class Diagnostics:
    tail_estimate: float = 0.0
    quad_error: float = 0.0
    nonconverged: list[str] = field(default_factory=list)

    def note(self, stage: str, quad):
        if isinstance(quad, kernels.QuadratureResult):
            self.quad_error += quad.error_estimate
        else:
            self.quad_error += float(np.max(quad.error_estimates))
        if not quad.converged:
            self.nonconverged.append(stage)


@dataclass(frozen=True)
class IdentityResult:
    identity: str
    lhs: complex
    rhs: complex
    terms: dict[str, complex]
    diagnostics: Diagnostics

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def converged(self) -> bool:
        return not self.diagnostics.nonconverged


# ---------------------------------------------------------------------------
# helpers


def csum(values) -> complex:
    """Correctly rounded sum of complex values (order independent)."""
    v = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=complex).ravel()
    return complex(math.fsum(v.real), math.fsum(v.imag))


def _assemble(identity, lhs, terms, diag):
    return IdentityResult(identity, lhs, csum(terms.values()), dict(terms), diag)


def _check_interval(f, a, b):
    if not a < b:
        raise GuardError(G_INTERVAL, f"need a < b, got a={a}, b={b}")
    lo, hi = f.domain
    if a < lo or b > hi:
        raise GuardError(G_DOMAIN, f"[{a}, {b}] is not inside [{lo}, {hi}]")


def _check_order(f, R):
    if R + 1 > f.max_order:
        raise GuardError(G_ORDER, f"R + 1 = {R + 1} but max_order = {f.max_order}")


def _check_psi_args(args, where):
    for x in args:
        if near_integer(x):
            raise GuardError(G_PSI_INTEGER, f"psi argument {x!r} at {where} is integral")


def _check_tie(x):
    if near_integer(x) and x != round(x):
        raise GuardError(G_TIE, f"endpoint {x!r} is within {arith.TIE_TOL} of an integer")


def _map(fn, items, workers):
    items = list(items)
    if workers is None or workers <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _poisson_indices(N: int) -> np.ndarray:
    """Frequencies kept by a truncated Poisson series: -N..N including 0."""
    return np.arange(-N, N + 1)


def _primed(N: int) -> np.ndarray:
    n = np.arange(-N, N + 1)
    return n[n != 0]


def _pairs(ns, terms, N) -> np.ndarray:
    """term(n) + term(-n) for n = 1..N."""
    out = np.zeros(N, dtype=complex)
    nz = ns != 0
    np.add.at(out, np.abs(ns[nz]) - 1, terms[nz])
    return out


def _tail(pairs) -> float:
    """Empirical tail size |S(N) - S(N/2)|: what the upper half of the kept pairs contributed.

    For pairs decaying like n^-s this is within a constant of the omitted tail, and unlike
    the last pair alone it does not vanish when a single pair cancels by symmetry.
    """
    N = len(pairs)
    if N == 0:
        return 0.0
    return float(abs(csum(pairs[N // 2:])))


def _divisor_limit(a, b):
    if a < 0:
        raise GuardError(G_DIVISOR_DOMAIN, f"a = {a}")
    M = math.floor(b)
    if M > arith.SIEVE_CAP:
        raise GuardError(G_SIEVE, f"floor(b) = {M} exceeds {arith.SIEVE_CAP}")
    return M


# ---------------------------------------------------------------------------
# direct sums (the oracle)


def direct_sum(weight: str, chi: PeriodicSequence | None, f, a: float, b: float) -> complex:
    """sum_{a<n<=b} w(n) f(n) in ascending n, correctly rounded."""
    if weight not in WEIGHTS:
        raise ValueError(f"unknown weight {weight!r}")
    if not a < b:
        raise GuardError(G_INTERVAL, f"need a < b, got a={a}, b={b}")
    _check_tie(a)
    _check_tie(b)
    lo, hi = arith.integer_range(a, b)
    if weight in ("divisor", "divisor_chi"):
        if a < 0:
            raise GuardError(G_DIVISOR_DOMAIN, f"a = {a}")
        lo = max(lo, 1)
    if hi < lo:
        return 0j
    n = np.arange(lo, hi + 1)
    vals = np.asarray(f(n.astype(float)), dtype=complex)
    if weight in ("chi", "divisor_chi"):
        if chi is None:
            raise ValueError(f"weight {weight!r} needs chi")
        vals = vals * chi(n)
    if weight in ("divisor", "divisor_chi"):
        vals = vals * arith.divisor_sieve(max(hi, 1)).d[n]
    return csum(vals)


def _class_sum(f, a, b, r, k, m) -> complex:
    n = np.fromiter(arith.residues_in_class(a, b, r, k, m), dtype=np.int64)
    if n.size == 0:
        return 0j
    return csum(np.asarray(f((m * n).astype(float)), dtype=complex))


# ---------------------------------------------------------------------------
# Abel and Euler summation


def abel_sum(nodes: Sequence[float], coeffs: Sequence[complex], f: SmoothFunction, a: float, b: float,
             params: TruncationParams = TruncationParams(), lambda0: float | None = None) -> IdentityResult:
    """sum_{a<l(n)<=b} c(n) f(l(n)) = f(b)S(b) - f(a)S(a) - int_a^b S(t) f'(t) dt."""
    _check_interval(f, a, b)
    lam = np.asarray(nodes, dtype=float)
    c = np.asarray(coeffs, dtype=complex)
    if lam.shape != c.shape:
        raise ValueError("nodes and coeffs differ in length")
    if lam.size > 1 and not np.all(np.diff(lam) > 0):
        raise ValueError("nodes must be strictly increasing")
    for x in (a, b):
        if lam.size and np.min(np.abs(lam - x)) <= arith.TIE_TOL:
            raise GuardError(G_NODE, f"a node coincides with {x!r}")
    lam0 = a - 1.0 if lambda0 is None else float(lambda0)

    def S(t):
        return csum(c[lam <= t]) - csum(c[lam <= lam0])

    inside = (lam > a) & (lam <= b)
    lhs = csum(c[inside] * f(lam[inside])) if inside.any() else 0j

    diag = Diagnostics()
    fprime = f.derivative(1)
    cuts = np.concatenate([[a], lam[(lam > a) & (lam < b)], [b]])
    pieces = []
    for t0, t1 in zip(cuts[:-1], cuts[1:]):
        s = S(t0)
        if s == 0:
            continue
        q = kernels.integrate(fprime, t0, t1, params.quad_tol)
        diag.note(f"piece[{t0:g},{t1:g}]", q)
        pieces.append(s * q.value)
    terms = {
        "boundary-terms": f(b) * S(b) - f(a) * S(a),
        "stieltjes-integral": -csum(pieces),
    }
    return _assemble("abel", lhs, terms, diag)


def _euler_family(identity, f, a, b, r, k, m, params):
    """Generalised Euler formula for n = r (mod k) over (a/m, b/m], summand f(mn)."""
    _check_interval(f, a, b)
    if not 0 <= r < k:
        raise GuardError(G_RESIDUE, f"r={r}, k={k}")
    if m < 1:
        raise ValueError("m must be >= 1")

    def arg(u):
        return (u / m - r) / k

    _check_psi_args([arg(a), arg(b)], "an endpoint")
    lhs = _class_sum(f, a, b, r, k, m)
    diag = Diagnostics()
    tol = params.quad_tol
    main = kernels.integrate(f, a, b, tol / 2)
    diag.note("main-term", main)
    # psi(arg u) jumps where arg u is an integer: u = m (r + j k)
    j = np.arange(math.floor(arg(a)), math.ceil(arg(b)) + 1)
    breaks = m * (r + j * k)
    fprime = f.derivative(1)
    kern = kernels.integrate(lambda u: kernels.psi(0, arg(u)) * fprime(u), a, b, tol / 2, breaks=breaks)
    diag.note("psi-integral", kern)
    terms = {
        "main-term": main.value / (k * m),
        "psi-integral": kern.value,
        "boundary-terms": f(a) * kernels.psi(0, arg(a)) - f(b) * kernels.psi(0, arg(b)),
    }
    return _assemble(identity, lhs, terms, diag)


def euler_sum(f: SmoothFunction, a: float, b: float, params: TruncationParams = TruncationParams()):
    """sum_{a<n<=b} f(n) = int f + int psi f' + f(a)psi(a) - f(b)psi(b)."""
    return _euler_family("euler", f, a, b, 0, 1, 1, params)


def residue_class_sum(f, a, b, r, k, params: TruncationParams = TruncationParams()):
    return _euler_family("residue_class", f, a, b, r, k, 1, params)


def dilated_sum(f, a, b, m, params: TruncationParams = TruncationParams()):
    return _euler_family("dilated", f, a, b, 0, 1, m, params)


def dilated_residue_sum(f, a, b, r, k, m, params: TruncationParams = TruncationParams()):
    return _euler_family("dilated_residue", f, a, b, r, k, m, params)


def euler_sum_2d(f: BivariateFunction, a: int, b: int, c: int, d: int,
                 params: TruncationParams = TruncationParams(), max_split: int = 16) -> IdentityResult:
    """Two-variable Euler formula on the integer rectangle [a,b] x [c,d]."""
    corners = (a, b, c, d)
    if any(float(v) != math.floor(float(v)) for v in corners):
        raise GuardError(G_CORNER, f"corners {corners} must be integers")
    a, b, c, d = (int(v) for v in corners)
    if not (a < b and c < d):
        raise GuardError(G_INTERVAL, f"need a < b and c < d, got {corners}")
    m = np.arange(a + 1, b + 1, dtype=float)
    n = np.arange(c + 1, d + 1, dtype=float)
    lhs = csum(f(m[:, None], n[None, :]))

    diag = Diagnostics()
    split = 1
    while True:
        xs, wkx, wgx = _cell_rule(a, b, split)
        ys, wky, wgy = _cell_rule(c, d, split)
        X, Y = xs[:, None], ys[None, :]
        F, Fx, Fy, Fxy = f.partials(X, Y)
        fx_ = X - np.floor(X)
        fy_ = Y - np.floor(Y)
        integrands = {
            "integral-f": F,
            "integral-fx": Fx * fx_,
            "integral-fy": Fy * fy_,
            "integral-fxy": Fxy * fx_ * fy_,
        }
        kk = {s: _tensor_sum(wkx, g, wky) for s, g in integrands.items()}
        gg = {s: _tensor_sum(wgx, g, wgy) for s, g in integrands.items()}
        err = sum(abs(kk[s] - gg[s]) for s in kk)
        floor_ = kernels.EPS * sum(_tensor_sum(np.abs(wkx), np.abs(g), np.abs(wky)) for g in integrands.values())
        settled = err <= params.quad_tol or err <= 64 * floor_
        if settled or 2 * split > max_split or 4 * xs.size * ys.size > MAX_TENSOR_NODES:
            break
        split *= 2
    diag.quad_error = err
    if not settled:
        diag.nonconverged.append("tensor-quadrature")
    return _assemble("euler2d", lhs, {s: complex(v) for s, v in kk.items()}, diag)


def _tensor_sum(wx, g, wy) -> float:
    """sum_ij wx_i g_ij wy_j, correctly rounded (so constant f integrates exactly)."""
    return math.fsum((wx[:, None] * g * wy[None, :]).ravel())


def _cell_rule(lo, hi, split):
    """K15 and G7 nodes/weights on unit cells of [lo, hi], each split into ``split`` parts."""
    edges = np.linspace(lo, hi, (hi - lo) * split + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * kernels.GK_NODES[None, :]).ravel()
    wk = (half[:, None] * kernels.K_WEIGHTS[None, :]).ravel()
    wg = (half[:, None] * kernels.G_WEIGHTS[None, :]).ravel()
    return x, wk, wg


# ---------------------------------------------------------------------------
# Euler-Maclaurin analogues


def _boundary_stage(f, a, b, R, cells):
    """sum over (weight, scale K, shift) cells of
    weight * sum_{r<=R} (-1)^{r+1} K^r [psi_r(x/K - shift) f^(r)(x)]_a^b."""
    da = f.derivative_values(np.array(a), R)
    db = f.derivative_values(np.array(b), R)
    out = []
    for weight, K, shift in cells:
        if weight == 0:
            continue
        for r in range(R + 1):
            sign = -1.0 if r % 2 == 0 else 1.0
            jump = kernels.psi(r, b / K - shift) * db[r] - kernels.psi(r, a / K - shift) * da[r]
            out.append(weight * sign * K**r * jump)
    return csum(out)


def _remainder_series(g, a, b, period, R, N, coeff, tol):
    """-(-1)^R sum'_{|n|<=N} coeff(n)/(2 pi i n)^{R+1} int_a^b g(u) e^{2 pi i n u/period} du.

    The factor ``period^R`` is left to the caller.  Returns (value, last pair, quad).
    """
    F = kernels.fourier_integrals(g, a, b, period, N, tol)
    ns = _primed(N)
    terms = coeff(ns) * F.at(ns) / (1j * TWO_PI * ns) ** (R + 1)
    terms = -((-1.0) ** R) * terms
    return csum(terms), _pairs(ns, terms, N), F


def euler_maclaurin(f: SmoothFunction, a: float, b: float, params: TruncationParams = TruncationParams()):
    """Classical Euler-Maclaurin formula for sum_{a<n<=b} f(n), remainder as a truncated series."""
    _check_interval(f, a, b)
    R, N = params.R, params.N
    _check_order(f, R)
    _check_psi_args([a, b], "an endpoint")
    lhs = direct_sum("unit", None, f, a, b)
    diag = Diagnostics()
    main = kernels.integrate(f, a, b, params.quad_tol)
    diag.note("main-term", main)
    boundary = _boundary_stage(f, a, b, R, [(1.0, 1, 0.0)])
    rem, tail, F = _remainder_series(f.derivative(R + 1), a, b, 1, R, N, lambda n: np.ones(n.shape), params.quad_tol)
    diag.note("remainder-series", F)
    diag.tail_estimate = _tail(tail)
    terms = {"main-term": main.value, "boundary-terms": boundary, "remainder-series": rem}
    return _assemble("em", lhs, terms, diag)


def euler_maclaurin_chi(chi: PeriodicSequence, f: SmoothFunction, a: float, b: float,
                        params: TruncationParams = TruncationParams()) -> IdentityResult:
    """Euler-Maclaurin analogue for sum chi(n) f(n), chi of period k."""
    _check_interval(f, a, b)
    R, N, k = params.R, params.N, chi.k
    _check_order(f, R)
    ls = np.arange(1, k + 1)
    _check_psi_args([(x - l) / k for x in (a, b) for l in ls], "an endpoint")
    lhs = direct_sum("chi", chi, f, a, b)
    diag = Diagnostics()
    main = kernels.integrate(f, a, b, params.quad_tol)
    diag.note("main-term", main)
    vals = chi.values
    # sum'_n tau(chi,-n) e^{2 pi i n x/k}/(2 pi i n)^{r+1} = -sum_l chi(l) psi_r((x-l)/k)
    boundary = _boundary_stage(f, a, b, R, [(vals[l - 1], k, l / k) for l in ls])
    rem, tail, F = _remainder_series(f.derivative(R + 1), a, b, k, R, N,
                                     lambda n: arith.tau(chi, -n), params.quad_tol)
    diag.note("remainder-series", F)
    diag.tail_estimate = float(k) ** R * _tail(tail)
    terms = {
        "main-term": csum(vals) / k * main.value,
        "boundary-terms": boundary,
        "remainder-series": float(k) ** R * rem,
    }
    return _assemble("em_chi", lhs, terms, diag)


def _divisor_setup(f, a, b, R=None):
    _check_interval(f, a, b)
    if R is not None:
        _check_order(f, R)
    M = _divisor_limit(a, b)
    ms = np.arange(1, M + 1)
    return M, ms


def euler_maclaurin_divisor(f: SmoothFunction, a: float, b: float,
                            params: TruncationParams = TruncationParams(), workers: int = 1) -> IdentityResult:
    """Euler-Maclaurin analogue for sum d(n) f(n), via sum_{m<=b} sum_{a/m<n<=b/m} f(mn)."""
    R, N = params.R, params.N
    M, ms = _divisor_setup(f, a, b, R)
    _check_psi_args([x / m for x in (a, b) for m in ms], "an endpoint")
    lhs = direct_sum("divisor", None, f, a, b)
    diag = Diagnostics()
    main = kernels.integrate(f, a, b, params.quad_tol)
    diag.note("main-term", main)
    boundary = _boundary_stage(f, a, b, R, [(1.0, int(m), 0.0) for m in ms])
    g = f.derivative(R + 1)
    ones = lambda n: np.ones(n.shape)  # noqa: E731
    per_m = _map(lambda m: _remainder_series(g, a, b, int(m), R, N, ones, params.quad_tol), ms, workers)
    rems, tails = [], 0j
    for m, (rem, pairs, F) in zip(ms, per_m):
        diag.note(f"remainder-series[m={m}]", F)
        rems.append(float(m) ** R * rem)
        tails = tails + float(m) ** R * pairs
    diag.tail_estimate = _tail(tails)
    terms = {
        "main-term": arith.harmonic(M) * main.value,
        "boundary-terms": boundary,
        "remainder-series": csum(rems),
    }
    return _assemble("em_divisor", lhs, terms, diag)


def euler_maclaurin_divisor_chi(chi: PeriodicSequence, f: SmoothFunction, a: float, b: float,
                                params: TruncationParams = TruncationParams(), workers: int = 1) -> IdentityResult:
    """Euler-Maclaurin analogue for sum chi(n) d(n) f(n).

    Cells are (m, r2) with m <= b and r2 the residue of the cofactor mod k;
    chi(m r2) depends on m only through m mod k.
    """
    R, N, k = params.R, params.N, chi.k
    M, ms = _divisor_setup(f, a, b, R)
    r2s = np.arange(1, k + 1)
    _check_psi_args([(x / m - r2) / k for x in (a, b) for m in ms for r2 in r2s], "an endpoint")
    lhs = direct_sum("divisor_chi", chi, f, a, b)
    diag = Diagnostics()
    main = kernels.integrate(f, a, b, params.quad_tol)
    diag.note("main-term", main)
    main_w = csum(chi(int(m) * int(r2)) / (k * m) for m in ms for r2 in r2s)
    cells = [(chi(int(m) * int(r2)), int(m) * k, r2 / k) for m in ms for r2 in r2s]
    boundary = _boundary_stage(f, a, b, R, cells)
    g = f.derivative(R + 1)

    def one(m):
        chi_m = chi.dilate(int(m))
        return _remainder_series(g, a, b, int(m) * k, R, N, lambda n: arith.tau(chi_m, -n), params.quad_tol)

    per_m = _map(one, ms, workers)
    rems, tails = [], 0j
    for m, (rem, pairs, F) in zip(ms, per_m):
        diag.note(f"remainder-series[m={m}]", F)
        rems.append(float(m * k) ** R * rem)
        tails = tails + float(m * k) ** R * pairs
    diag.tail_estimate = _tail(tails)
    terms = {
        "main-term": main_w * main.value,
        "boundary-terms": boundary,
        "remainder-series": csum(rems),
    }
    return _assemble("em_divisor_chi", lhs, terms, diag)


# ---------------------------------------------------------------------------
# Poisson analogues


def _require_good(f, a, b):
    ok, reason = is_good_on(f, (a, b))
    if not ok:
        raise GuardError(G_NOT_GOOD, reason)


def poisson(f: SmoothFunction, a: float, b: float, params: TruncationParams = TruncationParams()):
    """Classical Poisson formula: sum_{|n|<=N} int_a^b f(u) e^{-2 pi i n u} du."""
    _check_interval(f, a, b)
    _check_psi_args([a, b], "an endpoint")
    _require_good(f, a, b)
    lhs = direct_sum("unit", None, f, a, b)
    N = params.N
    F = kernels.fourier_integrals(f, a, b, 1, N, params.quad_tol)
    ns = _poisson_indices(N)
    terms_n = F.at(-ns)
    diag = Diagnostics()
    diag.note("n-series", F)
    diag.tail_estimate = _tail(_pairs(ns, terms_n, N))
    terms = {
        "n0-term": csum(terms_n[ns == 0]),
        "n-series": csum(terms_n[ns != 0]),
    }
    return _assemble("poisson", lhs, terms, diag)


def poisson_chi(chi: PeriodicSequence, f: SmoothFunction, a: float, b: float,
                params: TruncationParams = TruncationParams()) -> IdentityResult:
    """(1/k) sum_{|n|<=N} tau(chi, n) int_a^b f(u) e^{-2 pi i n u/k} du."""
    _check_interval(f, a, b)
    k = chi.k
    _check_psi_args([(x - l) / k for x in (a, b) for l in range(1, k + 1)], "an endpoint")
    _require_good(f, a, b)
    lhs = direct_sum("chi", chi, f, a, b)
    N = params.N
    F = kernels.fourier_integrals(f, a, b, k, N, params.quad_tol)
    ns = _poisson_indices(N)
    terms_n = arith.tau(chi, ns) * F.at(-ns) / k
    diag = Diagnostics()
    diag.note("n-series", F)
    diag.tail_estimate = _tail(_pairs(ns, terms_n, N))
    terms = {
        "n0-term": csum(terms_n[ns == 0]),
        "n-series": csum(terms_n[ns != 0]),
    }
    return _assemble("poisson_chi", lhs, terms, diag)


def poisson_divisor(f: SmoothFunction, a: float, b: float, params: TruncationParams = TruncationParams(),
                    workers: int = 1) -> IdentityResult:
    """sum_{|n|<=N} sum_{m<=b} (1/m) int_a^b f(u) e^{2 pi i n u/m} du."""
    M, ms = _divisor_setup(f, a, b)
    _check_psi_args([x / m for x in (a, b) for m in ms], "an endpoint")
    _require_good(f, a, b)
    lhs = direct_sum("divisor", None, f, a, b)
    N = params.N
    ns = _poisson_indices(N)
    series_n = ns[ns != 0]
    diag = Diagnostics()
    terms = {}
    if np.any(ns == 0):
        # n = 0 contributes H(b) int f; assembled exactly as in the character-weighted case
        main = kernels.integrate(f, a, b, params.quad_tol)
        diag.note("main-term", main)
        terms["n0-term"] = csum(1.0 / m for m in ms) * main.value
    per_m = _map(lambda m: kernels.fourier_integrals(f, a, b, int(m), N, params.quad_tol), ms, workers)
    rest, pairs = [], 0j
    for m, F in zip(ms, per_m):
        diag.note(f"n-series[m={m}]", F)
        t = F.at(series_n) / m
        rest.append(t)
        pairs = pairs + _pairs(series_n, t, N)
    diag.tail_estimate = _tail(pairs)
    terms["n-series"] = csum(np.concatenate(rest))
    return _assemble("poisson_divisor", lhs, terms, diag)


def poisson_divisor_chi(chi: PeriodicSequence, f: SmoothFunction, a: float, b: float,
                        params: TruncationParams = TruncationParams(), workers: int = 1) -> IdentityResult:
    """Main term plus sum'_{|n|<=N} sum_m (1/km) tau(chi_m, -n) int f(u) e^{2 pi i n u/(mk)} du,
    with chi_m(r) = chi(m r)."""
    M, ms = _divisor_setup(f, a, b)
    k = chi.k
    r2s = range(1, k + 1)
    _check_psi_args([(x / m - r2) / k for x in (a, b) for m in ms for r2 in r2s], "an endpoint")
    _require_good(f, a, b)
    lhs = direct_sum("divisor_chi", chi, f, a, b)
    N = params.N
    ns = _poisson_indices(N)
    series_n = ns[ns != 0]
    diag = Diagnostics()
    terms = {}
    if np.any(ns == 0):
        main = kernels.integrate(f, a, b, params.quad_tol)
        diag.note("main-term", main)
        weight = csum(chi(int(m) * r2) / (k * m) for m in ms for r2 in r2s)
        terms["n0-term"] = weight * main.value

    def one(m):
        F = kernels.fourier_integrals(f, a, b, int(m) * k, N, params.quad_tol)
        t = arith.tau(chi.dilate(int(m)), -series_n) * F.at(series_n) / (k * m)
        return t, F

    per_m = _map(one, ms, workers)
    rest, pairs = [], 0j
    for m, (t, F) in zip(ms, per_m):
        diag.note(f"n-series[m={m}]", F)
        rest.append(t)
        pairs = pairs + _pairs(series_n, t, N)
    diag.tail_estimate = _tail(pairs)
    terms["n-series"] = csum(np.concatenate(rest))
    return _assemble("poisson_divisor_chi", lhs, terms, diag)


# ---------------------------------------------------------------------------
# series-form boundary stage, kept as an oracle for the closed form


def boundary_series_chi(chi: PeriodicSequence, x: float, r: int, N: int) -> complex:
    """sum'_{|n|<=N} tau(chi,-n) e^{2 pi i n x/k} / (2 pi i n)^{r+1}, the truncated series whose
    limit is -sum_l chi(l) psi_r((x - l)/k)."""
    k = chi.k
    ns = _primed(N)
    t = arith.tau(chi, -ns) * np.exp(1j * TWO_PI * ns * x / k) / (1j * TWO_PI * ns) ** (r + 1)
    return csum(t)


def boundary_closed_chi(chi: PeriodicSequence, x: float, r: int) -> complex:
    k = chi.k
    return -csum(chi.values[l - 1] * kernels.psi(r, (x - l) / k) for l in range(1, k + 1))
