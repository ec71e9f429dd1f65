import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arithsum import formulae as F
from arithsum.arith import GuardError, PeriodicSequence
from arithsum.formulae import TruncationParams
from arithsum.smoothfn import BivariateFunction, SmoothFunction

ONE = PeriodicSequence((1,))
ALT = PeriodicSequence((1, -1))
MOD4 = PeriodicSequence((1, 0, -1, 0))
W = cmath.exp(2j * cmath.pi / 3)
CUBIC = PeriodicSequence((1, W, W * W))


def S(src, a, b, max_order=16):
    return SmoothFunction.parse(src, a, b, max_order)


def rel(res):
    return res.residual / (1 + abs(res.lhs))


# ---------------------------------------------------------------------------
# direct sums


def test_direct_sum_examples():
    assert F.direct_sum("unit", None, S("x", 0.5, 10.5), 0.5, 10.5) == 55
    assert F.direct_sum("divisor", None, S("1", 0.5, 10.5), 0.5, 10.5) == 27
    assert F.direct_sum("chi", ALT, S("1", 0.5, 8.5), 0.5, 8.5) == 0
    assert F.direct_sum("divisor", None, S("x", 0.5, 6.5), 0.5, 6.5) == 57
    assert F.direct_sum("divisor", None, S("1", 11.5, 12.5), 11.5, 12.5) == 6


def test_direct_sum_tie_guard():
    f = S("x", 0, 11)
    with pytest.raises(GuardError) as info:
        F.direct_sum("unit", None, f, 0.5, 10 - 1e-13)
    assert info.value.guard == F.G_TIE
    # exact integers are unambiguous and accepted
    assert F.direct_sum("unit", None, f, 0.0, 10.0) == 55


def test_direct_sum_needs_chi_and_known_weight():
    f = S("1", 0, 3)
    with pytest.raises(ValueError):
        F.direct_sum("chi", None, f, 0.5, 2.5)
    with pytest.raises(ValueError):
        F.direct_sum("squarefree", None, f, 0.5, 2.5)


# ---------------------------------------------------------------------------
# Abel summation and the Euler family


def test_abel_examples():
    res = F.abel_sum([1, 2, 3], [1, 1, 1], S("x", 0.5, 3.5), 0.5, 3.5)
    assert res.lhs == 6 and res.residual <= 1e-12
    empty = F.abel_sum([10.0, 11.0], [1, 1], S("x", 0.5, 3.5), 0.5, 3.5)
    assert empty.lhs == 0 and empty.rhs == 0
    nodes = [n + 0.5 for n in range(6)]
    res = F.abel_sum(nodes, [(-1) ** n for n in range(6)], S("exp(-x)", 0, 4), 0, 4)
    assert res.lhs == pytest.approx(sum((-1) ** n * np.exp(-(n + 0.5)) for n in range(4)), abs=1e-15)
    assert res.residual <= 1e-11


def test_abel_lambda0_invariance():
    f = S("sin(x)+x/3", 0.25, 9.75)
    nodes = np.sort(np.random.default_rng(3).uniform(-2, 12, 40))
    coeffs = np.random.default_rng(4).normal(size=40) + 1j
    r1 = F.abel_sum(nodes, coeffs, f, 0.25, 9.75)
    r2 = F.abel_sum(nodes, coeffs, f, 0.25, 9.75, lambda0=-5.0)
    assert r1.lhs == r2.lhs
    assert abs(r1.rhs - r2.rhs) <= 1e-11 and r1.residual <= 1e-11


def test_abel_guards():
    f = S("x", 0.5, 3.5)
    with pytest.raises(GuardError) as info:
        F.abel_sum([1, 3.5], [1, 1], f, 0.5, 3.5)
    assert info.value.guard == F.G_NODE
    with pytest.raises(ValueError):
        F.abel_sum([2, 1], [1, 1], f, 0.5, 3.5)


def test_abel_agrees_with_euler():
    f = S("exp(x/4)*cos(x)", 0.5, 12.5)
    ab = F.abel_sum(np.arange(1, 13), np.ones(12), f, 0.5, 12.5)
    eu = F.euler_sum(f, 0.5, 12.5)
    assert ab.lhs == eu.lhs
    assert abs(ab.rhs - eu.rhs) <= 1e-11


def test_euler_examples():
    r = F.euler_sum(S("x", 0.5, 10.5), 0.5, 10.5)
    assert r.lhs == 55 and r.residual <= 1e-11
    r = F.euler_sum(S("1", 0.5, 10.5), 0.5, 10.5)
    assert r.lhs == 10 and r.rhs == 10
    r = F.euler_sum(S("x^2", 0.5, 10.5), 0.5, 10.5)
    assert r.lhs == 385 and r.residual <= 1e-11


def test_euler_integer_endpoint_rejected():
    with pytest.raises(GuardError) as info:
        F.euler_sum(S("x", 1, 5.5), 1.0, 5.5)
    assert info.value.guard == F.G_PSI_INTEGER


def test_euler2d_examples():
    r = F.euler_sum_2d(BivariateFunction.parse("1"), 0, 3, 0, 2)
    assert r.lhs == 6 and r.rhs == 6
    r = F.euler_sum_2d(BivariateFunction.parse("x*y"), 0, 2, 0, 2)
    assert r.lhs == 9 and r.residual <= 1e-12
    # (1+n) + (2+n) summed over n = 1..3 is 5 + 7 + 9
    r = F.euler_sum_2d(BivariateFunction.parse("x+y"), 0, 2, 0, 3)
    assert r.lhs == 21 and r.residual <= 1e-12


def test_euler2d_smooth_and_guard():
    r = F.euler_sum_2d(BivariateFunction.parse("exp(-x/3)*cos(x*y/7)"), -2, 6, 1, 5)
    assert r.residual <= 1e-11 and r.converged
    with pytest.raises(GuardError) as info:
        F.euler_sum_2d(BivariateFunction.parse("x"), 0.5, 2, 0, 1)
    assert info.value.guard == F.G_CORNER


def test_dilated_residue_examples():
    r = F.residue_class_sum(S("1", 0.5, 12.5), 0.5, 12.5, 1, 4)
    assert r.lhs == 3 and r.rhs == 3
    r = F.dilated_sum(S("x", 0.5, 10.5), 0.5, 10.5, 2)
    assert r.lhs == 30 and r.residual <= 1e-12
    r = F.dilated_residue_sum(S("1", 0.5, 20.5), 0.5, 20.5, 0, 2, 2)
    assert r.lhs == 5 and r.residual <= 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 20), st.integers(1, 30), st.integers(1, 6), st.integers(1, 4), st.integers(0, 5))
def test_dilated_residue_random(a2, length, k, m, r0):
    a = a2 + 0.5
    b = a + length
    f = S("exp(-x/9)*sin(x/2)+1", a, b)
    r = F.dilated_residue_sum(f, a, b, r0 % k, k, m)
    assert r.residual <= 1e-11


def test_dilated_residue_guards():
    f = S("x", 0.5, 12.5)
    with pytest.raises(GuardError) as info:
        F.residue_class_sum(f, 0.5, 12.5, 4, 4)
    assert info.value.guard == F.G_RESIDUE
    with pytest.raises(GuardError):
        F.residue_class_sum(S("x", 1, 12.5), 1.0, 12.5, 1, 4)  # (1 - 1)/4 = 0


# ---------------------------------------------------------------------------
# Euler-Maclaurin analogues


def test_em_chi_examples():
    r = F.euler_maclaurin_chi(ONE, S("x^2", 0.5, 10.5), 0.5, 10.5, TruncationParams(R=2, N=3))
    assert r.lhs == 385 and r.terms["remainder-series"] == 0 and r.residual <= 1e-10
    r = F.euler_maclaurin_chi(ALT, S("1", 0.5, 8.5), 0.5, 8.5, TruncationParams(R=0, N=50))
    assert r.lhs == 0 and r.terms["main-term"] == 0 and r.residual <= 1e-12
    r = F.euler_maclaurin_chi(MOD4, S("exp(-x/5)", 0.3, 40.3), 0.3, 40.3, TruncationParams(R=3, N=200))
    assert r.residual <= 1e-8 * (1 + abs(r.lhs))


def test_em_chi_stage_names():
    r = F.euler_maclaurin_chi(MOD4, S("x", 0.5, 4.5), 0.5, 4.5, TruncationParams(R=1, N=5))
    assert set(r.terms) == {"main-term", "boundary-terms", "remainder-series"}
    assert r.residual == abs(r.lhs - r.rhs)


def test_em_divisor_examples():
    r = F.euler_maclaurin_divisor(S("1", 0.5, 10.5), 0.5, 10.5, TruncationParams(R=0, N=2000))
    assert r.lhs == 27
    assert r.terms["main-term"] == pytest.approx(10 * 7381 / 2520, rel=1e-15)
    assert r.residual <= 1e-12  # f' = 0: boundary terms carry the whole correction
    r = F.euler_maclaurin_divisor(S("x", 0.5, 6.5), 0.5, 6.5, TruncationParams(R=1, N=10))
    assert r.lhs == 57 and r.residual <= 1e-12
    r = F.euler_maclaurin_divisor(S("1", 5.5, 6.5), 5.5, 6.5, TruncationParams(R=0, N=10))
    assert r.lhs == 4 and r.residual <= 1e-12


def test_em_divisor_chi_examples():
    p = TruncationParams(R=0, N=10)
    r = F.euler_maclaurin_divisor_chi(ALT, S("1", 0.5, 6.5), 0.5, 6.5, p)
    assert r.lhs == -4 and r.residual <= 1e-12
    r = F.euler_maclaurin_divisor_chi(CUBIC, S("1", 0.5, 9.5), 0.5, 9.5, p)
    expected = sum(CUBIC(n) * sum(1 for i in range(1, n + 1) if n % i == 0) for n in range(1, 10))
    assert abs(r.lhs - expected) <= 1e-13 and r.residual <= 1e-12


@pytest.mark.parametrize("R", [2, 3, 4])
def test_em_smooth_jobs(R):
    p = TruncationParams(R=R, N=500)
    f = S("cos(x/3)*exp(-x/11)", 0.5, 23.5)
    for res in (F.euler_maclaurin_chi(CUBIC, f, 0.5, 23.5, p),
                F.euler_maclaurin_divisor(f, 0.5, 23.5, p),
                F.euler_maclaurin_divisor_chi(MOD4, f, 0.5, 23.5, p)):
        assert rel(res) <= 1e-9, res.identity


@pytest.mark.parametrize("deg", [0, 1, 2, 3])
def test_em_polynomial_exactness(deg):
    src = "+".join(f"{c}*x^{j}" for j, c in zip(range(deg + 1), (2, -1, 0.5, 0.25)))
    f = S(src, 0.5, 17.5)
    p = TruncationParams(R=deg, N=7)
    for res in (F.euler_maclaurin_chi(CUBIC, f, 0.5, 17.5, p),
                F.euler_maclaurin_divisor(f, 0.5, 17.5, p),
                F.euler_maclaurin_divisor_chi(ALT, f, 0.5, 17.5, p)):
        assert res.terms["remainder-series"] == 0
        assert res.residual <= 1e-10


def test_em_order_guard():
    f = S("exp(x/9)", 0.5, 5.5, max_order=3)
    with pytest.raises(GuardError) as info:
        F.euler_maclaurin_chi(ALT, f, 0.5, 5.5, TruncationParams(R=3, N=10))
    assert info.value.guard == F.G_ORDER


def test_em_psi_argument_guard():
    with pytest.raises(GuardError) as info:
        F.euler_maclaurin_chi(MOD4, S("x", 0.5, 7), 0.5, 7.0, TruncationParams(R=1, N=10))
    assert info.value.guard == F.G_PSI_INTEGER
    with pytest.raises(GuardError):
        F.euler_maclaurin_divisor(S("x", 0.5, 6), 0.5, 6.0, TruncationParams(R=1, N=10))


def test_divisor_domain_guard():
    with pytest.raises(GuardError) as info:
        F.euler_maclaurin_divisor(S("x", -1.5, 6.5), -1.5, 6.5, TruncationParams(R=1, N=10))
    assert info.value.guard == F.G_DIVISOR_DOMAIN


# ---------------------------------------------------------------------------
# Poisson analogues


def test_poisson_chi_examples():
    r = F.poisson_chi(ONE, S("1", 0.25, 5.25), 0.25, 5.25, TruncationParams(N=10))
    assert r.lhs == 5 and r.residual <= 1e-12
    errs = [F.poisson_chi(ONE, S("x", 0.25, 3.25), 0.25, 3.25, TruncationParams(N=N)).residual
            for N in (100, 1000)]
    assert errs[1] < errs[0] / 5 and errs[1] <= 1e-3
    f = S("sin(pi*(x-0.5)/40)^2", 0.5, 40.5)
    r = F.poisson_chi(MOD4, f, 0.5, 40.5, TruncationParams(N=2000))
    assert r.residual <= 1e-5


def test_poisson_divisor_examples():
    r = F.poisson_divisor(S("1", 0.5, 10.5), 0.5, 10.5, TruncationParams(N=10))
    assert r.terms["n0-term"] == pytest.approx(10 * 7381 / 2520, rel=1e-15)
    big = F.poisson_divisor(S("1", 0.5, 10.5), 0.5, 10.5, TruncationParams(N=4000))
    assert big.residual < r.residual and big.residual <= 1e-3
    r = F.poisson_divisor(S("1", 5.5, 6.5), 5.5, 6.5, TruncationParams(N=2000))
    assert r.lhs == 4 and r.residual <= 2e-3
    f = S("sin(pi*(x-0.5)/30)^2", 0.5, 30.5)
    r = F.poisson_divisor(f, 0.5, 30.5, TruncationParams(N=4000))
    assert r.residual <= 1e-4


def test_poisson_divisor_chi_examples():
    r = F.poisson_divisor_chi(ALT, S("1", 0.5, 6.5), 0.5, 6.5, TruncationParams(N=4000))
    assert r.lhs == -4 and r.residual <= 2e-3
    r = F.poisson_divisor_chi(PeriodicSequence((0, 1)), S("1", 0.5, 8.5), 0.5, 8.5, TruncationParams(N=4000))
    assert r.lhs == 13 and r.residual <= 2e-3


def test_poisson_not_good_rejected():
    f = S("sqrt(x)", 1e-30, 4.5, max_order=0)
    with pytest.raises(GuardError) as info:
        F.poisson_chi(ONE, f, 1e-30 + 0.25, 4.5, TruncationParams(N=10))
    assert info.value.guard == F.G_NOT_GOOD


def test_poisson_integer_endpoint_rejected():
    with pytest.raises(GuardError) as info:
        F.poisson_chi(ONE, S("x", 1, 5.5), 1.0, 5.5, TruncationParams(N=10))
    assert info.value.guard == "integer psi-argument at endpoint"


def test_poisson_windowed_decay_faster_than_plain():
    f_plain = S("exp(-x/7)", 0.5, 12.5)
    f_win = S("exp(-x/7)*sin(pi*(x-0.5)/12)^2", 0.5, 12.5)
    for f, bound in ((f_plain, 1e-3), (f_win, 1e-6)):
        r = F.poisson_chi(CUBIC, f, 0.5, 12.5, TruncationParams(N=1000))
        assert r.residual <= bound


# ---------------------------------------------------------------------------
# cross-identity invariants


@pytest.mark.parametrize("src,a,b", [("exp(-x/7)*cos(x/3)", 0.5, 12.5), ("sqrt(x+1)", 2.5, 19.5), ("x^3/100", 0.5, 7.5)])
def test_k1_collapses(src, a, b):
    f = S(src, a, b)
    p = TruncationParams(R=3, N=300)

    def close(x, y):
        return abs(x - y) <= 1e-12 * max(1.0, abs(x), abs(y))

    assert close(F.euler_maclaurin_chi(ONE, f, a, b, p).rhs, F.euler_maclaurin(f, a, b, p).rhs)
    assert close(F.poisson_chi(ONE, f, a, b, p).rhs, F.poisson(f, a, b, p).rhs)
    assert close(F.euler_maclaurin_divisor_chi(ONE, f, a, b, p).rhs, F.euler_maclaurin_divisor(f, a, b, p).rhs)
    assert close(F.poisson_divisor_chi(ONE, f, a, b, p).rhs, F.poisson_divisor(f, a, b, p).rhs)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=6),
       st.floats(-30, 30).map(lambda v: round(v) + 0.37), st.integers(0, 5))
def test_boundary_closed_form_matches_series(vals, x, r):
    chi = PeriodicSequence(tuple(complex(*v) for v in vals))
    closed = F.boundary_closed_chi(chi, x, r)
    k = chi.k
    scale = sum(abs(v) for v in chi.values)
    # summation by parts: the omitted tail is O(1/N^(r+1)), with a constant growing as
    # the arguments (x - l)/k approach an integer
    delta = min(abs(t - round(t)) for t in ((x - l) / k for l in range(1, k + 1)))
    for N in (200, 2000):
        series = F.boundary_series_chi(chi, x, r, N)
        bound = 2 * scale * k / (delta * (2 * np.pi * N) ** (r + 1)) + 1e-14 * scale
        assert abs(series - closed) <= bound


def test_interval_additivity():
    p = TruncationParams(R=3, N=400)
    src = "exp(-x/13)*sin(x/2)+2"
    whole = F.euler_maclaurin_chi(CUBIC, S(src, 0.5, 30.5), 0.5, 30.5, p)
    left = F.euler_maclaurin_chi(CUBIC, S(src, 0.5, 14.5), 0.5, 14.5, p)
    right = F.euler_maclaurin_chi(CUBIC, S(src, 14.5, 30.5), 14.5, 30.5, p)
    assert abs(whole.lhs - (left.lhs + right.lhs)) <= 1e-13
    assert abs(whole.rhs - (left.rhs + right.rhs)) <= 1e-9
    whole = F.euler_maclaurin_divisor(S(src, 0.5, 30.5), 0.5, 30.5, p)
    left = F.euler_maclaurin_divisor(S(src, 0.5, 14.5), 0.5, 14.5, p)
    right = F.euler_maclaurin_divisor(S(src, 14.5, 30.5), 14.5, 30.5, p)
    assert abs(whole.lhs - (left.lhs + right.lhs)) <= 1e-12
    assert abs(whole.rhs - (left.rhs + right.rhs)) <= 1e-9


def test_threads_bit_identical():
    f = S("cos(x/4)*exp(-x/20)", 0.5, 25.5)
    p = TruncationParams(R=3, N=300)
    a = F.euler_maclaurin_divisor_chi(CUBIC, f, 0.5, 25.5, p, workers=1)
    b = F.euler_maclaurin_divisor_chi(CUBIC, f, 0.5, 25.5, p, workers=4)
    assert a.rhs == b.rhs and a.terms == b.terms
    p = TruncationParams(N=500)
    a = F.poisson_divisor(f, 0.5, 25.5, p, workers=1)
    b = F.poisson_divisor(f, 0.5, 25.5, p, workers=3)
    assert a.rhs == b.rhs


def test_tail_estimate_tracks_residual():
    r = F.poisson_chi(ONE, S("x", 0.25, 3.25), 0.25, 3.25, TruncationParams(N=1000))
    assert 0.1 < r.diagnostics.tail_estimate / r.residual < 10
