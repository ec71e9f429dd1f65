"""Bernoulli kernels and the quadrature engines built on them.

The periodic kernel ``psi(r, x) = B_{r+1}({x}) / (r+1)!`` is evaluated from
exact rational Bernoulli coefficients (cached), so boundary terms carry no
truncation error.  The Fourier partial sums of the same kernel are kept
alongside for convergence checks.

Quadrature is adaptive Gauss-Kronrod (G7/K15) over vectorised panels, plus a
batched transform that returns ``int_a^b g(u) exp(2 pi i n u / K) du`` for
every ``|n| <= N`` at once by folding uniform panels into an FFT.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

MAX_DEGREE = 32
MAX_PANELS = 2**20
# The batched transform is uniform rather than adaptive; it gets a larger budget.
MAX_BATCH_PANELS = 2**23

EPS = np.finfo(float).eps
TWO_PI = 2.0 * math.pi

# extended precision (x87 long double where the platform has it) for convergence studies
EXT = np.longdouble
PI_EXT = EXT("3.14159265358979323846264338327950288")


def to_extended(q: Fraction):
    """Fraction -> long double, rounded once from a 40-digit decimal."""
    with localcontext() as ctx:
        ctx.prec = 40
        return EXT(str(Decimal(q.numerator) / Decimal(q.denominator)))


class CapacityError(ValueError):
    """A requested size exceeds a configured capacity."""


# ---------------------------------------------------------------------------
# Bernoulli polynomials


@dataclass(frozen=True)
class BernoulliPoly:
    degree: int
    coefficients: tuple[Fraction, ...]  # lowest degree first

    def __post_init__(self):
        if len(self.coefficients) != self.degree + 1:
            raise ValueError("coefficient count must be degree + 1")

    def __call__(self, x):
        """Horner evaluation; exact for Fraction input, float otherwise."""
        if isinstance(x, (Fraction, int)):
            acc = Fraction(0)
            for c in reversed(self.coefficients):
                acc = acc * x + c
            return acc
        acc = 0.0
        for c in reversed(self.coefficients):
            acc = acc * x + float(c)
        return acc


@lru_cache(maxsize=None)
def bernoulli_numbers(n: int) -> tuple[Fraction, ...]:
    """B_0..B_n with the B_1 = -1/2 convention."""
    b = [Fraction(1)]
    for m in range(1, n + 1):
        s = sum(math.comb(m + 1, j) * b[j] for j in range(m))
        b.append(-s / (m + 1))
    return tuple(b)


@lru_cache(maxsize=None)
def _bernoulli_poly(r: int) -> BernoulliPoly:
    nums = bernoulli_numbers(r)
    # B_r(x) = sum_j C(r, j) B_j x^{r-j}; store by ascending power of x.
    coeffs = [Fraction(0)] * (r + 1)
    for j in range(r + 1):
        coeffs[r - j] = math.comb(r, j) * nums[j]
    return BernoulliPoly(r, tuple(coeffs))


def bernoulli_poly(r: int, max_degree: int = MAX_DEGREE) -> BernoulliPoly:
    if r < 0:
        raise ValueError("degree must be non-negative")
    if r > max_degree:
        raise CapacityError(f"Bernoulli degree {r} exceeds max degree {max_degree}")
    return _bernoulli_poly(r)


# ---------------------------------------------------------------------------
# periodic kernels psi_r


@dataclass(frozen=True)
class PsiKernel:
    order: int
    poly: BernoulliPoly
    scale: int
    float_coefficients: tuple[float, ...]

    def __call__(self, x):
        t = frac(x)
        acc = np.zeros_like(t) if isinstance(t, np.ndarray) else 0.0
        for c in reversed(self.float_coefficients):
            acc = acc * t + c
        return acc

    def extended(self, x):
        """Same kernel evaluated in long double, coefficients rounded from the exact rationals."""
        x = np.asarray(x, dtype=EXT)
        t = x - np.floor(x)
        acc = np.zeros_like(t)
        for c in reversed(self.poly.coefficients):
            acc = acc * t + to_extended(c / self.scale)
        return acc


@lru_cache(maxsize=None)
def psi_kernel(r: int, max_degree: int = MAX_DEGREE) -> PsiKernel:
    if r < 0:
        raise ValueError("order must be non-negative")
    if r > max_degree - 1:
        raise CapacityError(f"psi order {r} exceeds max degree {max_degree} - 1")
    poly = bernoulli_poly(r + 1, max_degree)
    scale = math.factorial(r + 1)
    coeffs = tuple(float(c / scale) for c in poly.coefficients)
    return PsiKernel(r, poly, scale, coeffs)


def integral_part(x):
    """[x], the greatest integer not exceeding x."""
    return np.floor(x)


def frac(x):
    """x - [x], always in [0, 1)."""
    if isinstance(x, np.ndarray):
        t = x - np.floor(x)
        t[t >= 1.0] = 0.0
        return t
    t = x - math.floor(x)
    return 0.0 if t >= 1.0 else t


def psi(r: int, x):
    """B_{r+1}({x})/(r+1)!; at integers this is the left-limit value B_{r+1}(0)/(r+1)!."""
    return psi_kernel(r)(x)


def psi_fourier_partial(r: int, x, N: int, extended: bool = False):
    """-sum_{1<=|n|<=N} exp(2 pi i n x) / (2 pi i n)^(r+1), with +n and -n paired.

    Scalar x gives a complex whose imaginary part is rounding only.  With
    ``extended`` the paired (real) terms are summed in long double over an
    array of x, for measuring convergence below double-precision roundoff.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if extended:
        x = np.asarray(x, dtype=EXT)
        t = (x - np.floor(x))[None, ...]
        n = np.arange(1, N + 1, dtype=EXT).reshape((-1,) + (1,) * x.ndim)
        two_pi = 2 * PI_EXT
        # e^{i theta}/(i)^(r+1) + conjugate = 2 cos(theta - (r+1) pi/2)
        terms = 2 * np.cos(two_pi * n * t - (r + 1) * PI_EXT / 2) / (two_pi * n) ** (r + 1)
        return -terms[::-1].sum(axis=0)
    n = np.arange(1, N + 1, dtype=float)
    pos = np.exp(1j * TWO_PI * n * x) / (1j * TWO_PI * n) ** (r + 1)
    neg = np.exp(-1j * TWO_PI * n * x) / (-1j * TWO_PI * n) ** (r + 1)
    total = -complex(np.sum(pos + neg))
    # pairs are conjugates, so any imaginary residue is rounding
    assert abs(total.imag) <= 1e-12, total
    return complex(total.real, total.imag)


# ---------------------------------------------------------------------------
# Gauss-Kronrod rule (QUADPACK qk15 constants)

_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# full 15-point layout on [-1, 1]
GK_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
K_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
G_WEIGHTS = np.zeros(15)
G_WEIGHTS[[1, 3, 5]] = _WG[:3]
G_WEIGHTS[7] = _WG[3]
G_WEIGHTS[[9, 11, 13]] = _WG[2::-1]


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    error_estimate: float
    panels_used: int
    converged: bool = True

    def __post_init__(self):
        if self.error_estimate < 0 or self.panels_used < 1:
            raise ValueError("invalid quadrature result")


def _gk_panels(g, lo, hi):
    """Apply G7/K15 to each panel [lo_i, hi_i]; returns (K, err, resabs) arrays."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * GK_NODES[None, :]
    y = np.asarray(g(x))
    if y.shape != x.shape:
        y = np.broadcast_to(y, x.shape)
    k = (y @ K_WEIGHTS) * half
    gs = (y @ G_WEIGHTS) * half
    ay = np.abs(y)
    resabs = (ay @ K_WEIGHTS) * np.abs(half)
    mean = k / np.where(half == 0, 1.0, 2 * half)
    resasc = (np.abs(y - mean[:, None]) @ K_WEIGHTS) * np.abs(half)
    diff = np.abs(k - gs)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * diff / resasc) ** 1.5)
    err = np.where((resasc > 0) & (diff > 0), scaled, diff)
    err = err + EPS * resabs
    if not np.all(np.isfinite(k)):
        raise FloatingPointError("integrand is not finite on the panel nodes")
    return k, err, resabs


def integrate(
    g: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = 1e-12,
    *,
    breaks=None,
    initial_panels: int = 1,
    max_panels: int = MAX_PANELS,
) -> QuadratureResult:
    """Adaptive composite Gauss-Kronrod integral of a vectorised ``g`` over [a, b].

    ``breaks`` are interior points where ``g`` may be discontinuous; panels never
    straddle them.  Panels are bisected until each meets its share of ``tol``
    (or sits at the rounding floor).  Hitting ``max_panels`` returns the best
    value with ``converged=False``.
    """
    if not a < b:
        raise ValueError("integrate requires a < b")
    if tol <= 0:
        raise ValueError("tol must be positive")
    edges = np.linspace(a, b, max(1, int(initial_panels)) + 1)
    if breaks is not None:
        br = np.asarray(breaks, dtype=float)
        br = br[(br > a) & (br < b)]
        edges = np.union1d(edges, br)
    lo, hi = edges[:-1], edges[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    width = b - a

    values, errors = [], []
    n_done = 0
    exhausted = False
    while lo.size:
        k, err, resabs = _gk_panels(g, lo, hi)
        local = tol * (hi - lo) / width
        ok = (err <= local) | (err <= 4 * EPS * resabs) | (hi - lo <= 4 * EPS * np.abs(hi))
        values.append(k[ok])
        errors.append(err[ok])
        n_done += int(ok.sum())
        bad = ~ok
        if not bad.any():
            break
        if n_done + 2 * int(bad.sum()) > max_panels:
            values.append(k[bad])
            errors.append(err[bad])
            n_done += int(bad.sum())
            exhausted = True
            break
        m = 0.5 * (lo[bad] + hi[bad])
        lo, hi = np.concatenate([lo[bad], m]), np.concatenate([m, hi[bad]])

    vals = np.concatenate(values)
    value = complex(math.fsum(vals.real), math.fsum(np.imag(vals)))
    error = float(np.sum(np.concatenate(errors)))
    return QuadratureResult(value, error, max(n_done, 1), (not exhausted) and error <= tol)


def oscillatory_integrate(f, a: float, b: float, freq: float, tol: float = 1e-12) -> QuadratureResult:
    """int_a^b f(u) exp(2 pi i freq u) du with at least four panels per oscillation."""
    if not a < b:
        raise ValueError("oscillatory_integrate requires a < b")
    panels = max(1, 4 * math.ceil(abs(freq) * (b - a)))
    w = TWO_PI * freq
    return integrate(
        lambda u: f(u) * np.exp(1j * w * u), a, b, tol, initial_panels=panels,
        max_panels=max(MAX_PANELS, 2 * panels),
    )


# ---------------------------------------------------------------------------
# batched Fourier integrals


@dataclass(frozen=True)
class FourierIntegrals:
    """``values[i] = int_a^b g(u) exp(2 pi i n u / period) du`` for ``n = ns[i]``."""

    ns: np.ndarray
    values: np.ndarray
    error_estimates: np.ndarray
    panels_used: int
    converged: bool

    @property
    def N(self) -> int:
        return int(self.ns[-1])

    def at(self, n):
        return self.values[np.asarray(n) + self.N]

    def result(self, n: int) -> QuadratureResult:
        i = n + self.N
        return QuadratureResult(complex(self.values[i]), float(self.error_estimates[i]),
                                self.panels_used, self.converged)


def fourier_integrals(
    g: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    period: float,
    N: int,
    tol: float = 1e-12,
    *,
    panels_per_cycle: float = 2.0,
    h_max: float = 0.25,
    max_panels: int = MAX_BATCH_PANELS,
) -> FourierIntegrals:
    """All integrals ``int_a^b g(u) exp(2 pi i n u / period) du`` for ``|n| <= N``.

    Uniform panels of width ``h = period / L`` make the phase of panel ``j``
    equal to ``exp(2 pi i n j / L)``, so the sum over panels is one length-``L``
    FFT per Kronrod node.  ``L`` is chosen to give at least ``panels_per_cycle``
    panels per oscillation at the top frequency and ``h <= h_max``; it is
    doubled until the Gauss/Kronrod discrepancy is within ``tol``.
    """
    if not a < b:
        raise ValueError("fourier_integrals requires a < b")
    if N < 0 or period <= 0:
        raise ValueError("need N >= 0 and period > 0")
    L = max(8, math.ceil(panels_per_cycle * N), math.ceil(period / h_max))
    while True:
        ns, vals, trunc, floor, panels = _fourier_pass(g, a, b, period, N, L)
        # rounding in the folded sums cannot be refined away
        settled = bool(np.all((trunc <= tol) | (trunc <= 64 * floor)))
        if settled or 2 * panels > max_panels:
            return FourierIntegrals(ns, vals, trunc + floor, panels, settled)
        L *= 2


def _fourier_pass(g, a, b, period, N, L):
    h = period / L
    M = int(math.floor((b - a) / h))
    while M > 0 and a + M * h > b:
        M -= 1
    s = 0.5 * (GK_NODES + 1.0)  # node offsets within a panel, in (0, 1)
    ns = np.arange(-N, N + 1)
    accK = None
    absum = 0.0
    if M > 0:
        block = L * max(1, 16384 // L)  # bounds memory for high-order Taylor evaluation
        acc = np.zeros((L, 15), dtype=complex)
        for j0 in range(0, M, block):
            j1 = min(M, j0 + block)
            j = np.arange(j0, j1)
            x = a + (j[:, None] + s[None, :]) * h
            y = np.asarray(g(x))
            if y.shape != x.shape:
                y = np.broadcast_to(y, x.shape)
            if not np.all(np.isfinite(y)):
                raise FloatingPointError("integrand is not finite on the panel nodes")
            absum += float(np.sum(np.abs(y) @ K_WEIGHTS)) * 0.5 * h
            pad = (-len(j)) % L
            if pad:
                y = np.concatenate([y, np.zeros((pad, 15), dtype=y.dtype)])
            # fold panel index modulo L, offset so row 0 is panel j0 mod L
            y = y.reshape(-1, L, 15).sum(axis=0)
            acc += np.roll(y, j0 % L, axis=0)
        # S[q, t] = sum_j acc[j, t] exp(2 pi i q j / L)
        S = np.fft.ifft(acc, axis=0) * L
        q = ns % L
        node_phase = np.exp(1j * TWO_PI * ns[:, None] * s[None, :] / L)
        Sq = S[q, :] * node_phase
        accK = (Sq @ K_WEIGHTS) * 0.5 * h
        accG = (Sq @ G_WEIGHTS) * 0.5 * h
        start_phase = np.exp(1j * TWO_PI * ns * (a / period))
        accK = accK * start_phase
        accG = accG * start_phase
    else:
        accK = np.zeros(ns.shape, dtype=complex)
        accG = np.zeros(ns.shape, dtype=complex)

    lo = a + M * h
    if b - lo > 4 * EPS * max(abs(b), 1.0):
        half = 0.5 * (b - lo)
        x = lo + half * (GK_NODES + 1.0)
        y = np.asarray(g(x))
        if y.shape != x.shape:
            y = np.broadcast_to(y, x.shape)
        absum += float(np.abs(y) @ K_WEIGHTS) * half
        ph = np.exp(1j * TWO_PI * ns[:, None] * x[None, :] / period) * y[None, :]
        accK = accK + (ph @ K_WEIGHTS) * half
        accG = accG + (ph @ G_WEIGHTS) * half
        M += 1
    return ns, accK, np.abs(accK - accG), EPS * absum, max(M, 1)
