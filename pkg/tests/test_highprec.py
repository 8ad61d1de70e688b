import subprocess
import sys
from fractions import Fraction

import gmpy2
import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from robinkit.errors import DomainError, InvalidArgumentError, PrecisionError
from robinkit.highprec import (
    CertifiedOrder,
    IntervalReal,
    ceil_int,
    compare,
    const_euler_gamma,
    decide,
    directed,
    exp_i,
    floor_int,
    log1p_i,
    log_i,
    log_int,
    pow_i,
    require_decided,
    sci,
)

# 50-digit reference values (frozen from tests/oracles.py)
GAMMA_20 = "0.577215664901532860607"
POW_13_16980 = "13.169832378052032339722756673578362720656732125782"



def near(iv: IntervalReal, text: str, tol: str) -> bool:
    """iv meets the ball of radius tol around the decimal value text."""
    v, t = gmpy2.mpq(text), gmpy2.mpq(tol)
    return iv.lo <= v + t and v - t <= iv.hi

rationals = st.fractions(min_value=-10**6, max_value=10**6, max_denominator=10**6)


def test_euler_gamma_20_digits():
    assert oracles.euler_gamma_20() == GAMMA_20
    g = const_euler_gamma(20)
    assert near(g, GAMMA_20, "1e-21")
    assert float(g.width) <= 1e-19


def test_euler_gamma_nesting():
    g10, g20 = const_euler_gamma(10), const_euler_gamma(20)
    assert float(g10.width) <= 1e-9
    assert g10.lo <= g20.lo and g20.hi <= g10.hi


def test_euler_gamma_min_digits():
    with pytest.raises(InvalidArgumentError):
        const_euler_gamma(5)


def test_log_of_one_is_zero():
    x = log_i(IntervalReal.exact(1))
    assert x.contains(0)


def test_exp_log_round_trip():
    d = 60
    x = exp_i(log_i(IntervalReal.exact(2, d)))
    assert x.contains(2)
    assert x.width <= gmpy2.mpfr(10) ** (2 - d)


def test_pow_matches_series_oracle():
    assert mpmath.nstr(oracles.pow_50("13.16980", 1048576, 1048575), 50) == POW_13_16980
    y = pow_i(IntervalReal.exact("13.16980"), IntervalReal.exact(Fraction(1048576, 1048575)))
    assert near(y, POW_13_16980, "1e-48")
    assert y.format(12) == "1.31698323781e+01"


def test_domain_errors():
    with pytest.raises(DomainError):
        log_i(IntervalReal.exact(0))
    with pytest.raises(DomainError):
        log1p_i(IntervalReal.exact(-1))
    with pytest.raises(DomainError):
        IntervalReal.exact(1) / IntervalReal(gmpy2.mpfr(-1), gmpy2.mpfr(1))
    with pytest.raises(DomainError):
        pow_i(IntervalReal.exact(-2), IntervalReal.exact(2))


def test_compare_examples():
    assert compare(IntervalReal.exact(1), IntervalReal.exact(2)) is CertifiedOrder.LESS
    a = IntervalReal.exact(Fraction(1771561, 1771560))
    assert compare(a, IntervalReal.exact("1.0000005645")) is CertifiedOrder.LESS
    overlap = compare(IntervalReal(gmpy2.mpfr(0), gmpy2.mpfr(2)), IntervalReal(gmpy2.mpfr(1), gmpy2.mpfr(3)), max_digits=400)
    assert overlap is CertifiedOrder.UNDECIDED


def test_refinement_decides_close_values():
    # 1/3 vs 1/3 + 10^-70: undecided at 30 digits, decided after refinement.
    def build(d):
        return IntervalReal.exact(Fraction(1, 3), d), IntervalReal.exact(Fraction(1, 3) + Fraction(1, 10**70), d)

    a, b = build(30)
    assert compare(a, b) is CertifiedOrder.UNDECIDED
    assert decide(build, 30, 200) is CertifiedOrder.LESS


def test_exact_tie_stays_undecided():
    def build(d):
        return log_int(4, d), log_int(2, d) * 2

    order = decide(build, 30, 120)
    assert order is CertifiedOrder.UNDECIDED
    with pytest.raises(PrecisionError):
        require_decided(order, "log 4 vs 2 log 2")


def test_floor_ceil_exact_under_low_global_precision():
    down, _ = directed(100)
    x = down.div(10**30, 3)
    with gmpy2.context(gmpy2.get_context(), precision=12):
        assert floor_int(x) == 333333333333333333333333333333
        assert ceil_int(x) == 333333333333333333333333333334
    assert floor_int(down.div(-7, 2)) == -4 and ceil_int(down.div(-7, 2)) == -3


def test_sci_formatting():
    assert sci(gmpy2.mpfr("-3.14159265e-7"), 5) == "-3.1416e-07"
    assert sci(gmpy2.mpfr(0), 3) == "0.00e+00"


def test_precision_digits_alias():
    assert IntervalReal.exact(1, 77).precision_digits == 77


def _contains_exact(iv: IntervalReal, q: Fraction) -> bool:
    m = gmpy2.mpq(q.numerator, q.denominator)
    return iv.lo <= m <= iv.hi


@settings(max_examples=400, deadline=None)
@given(rationals, rationals, st.integers(min_value=12, max_value=80))
def test_containment_of_arithmetic(a, b, digits):
    x, y = IntervalReal.exact(a, digits), IntervalReal.exact(b, digits)
    assert _contains_exact(x + y, a + b)
    assert _contains_exact(x - y, a - b)
    assert _contains_exact(x * y, a * b)
    assert _contains_exact(-x, -a)
    if b != 0:
        assert _contains_exact(x / y, a / b)


@settings(max_examples=200, deadline=None)
@given(st.fractions(min_value=Fraction(1, 10**4), max_value=10**4, max_denominator=10**4), st.integers(12, 60))
def test_containment_of_elementary_functions(a, digits):
    ref = mpmath.MPContext()
    ref.dps = 3 * digits
    x = IntervalReal.exact(a, digits)
    v = ref.mpf(a.numerator) / a.denominator
    for iv, exact in ((log_i(x), ref.log(v)), (exp_i(IntervalReal.exact(a / 10**3, digits)), ref.exp(v / 1000)),
                      (log1p_i(x), ref.log1p(v))):
        assert gmpy2.mpfr(iv.lo, 700) <= gmpy2.mpfr(str(exact), 700) <= gmpy2.mpfr(iv.hi, 700)


@settings(max_examples=200, deadline=None)
@given(st.fractions(min_value=Fraction(1, 100), max_value=100, max_denominator=997), st.integers(12, 60))
def test_monotone_refinement(a, digits):
    coarse, fine = log_i(IntervalReal.exact(a, digits)), log_i(IntervalReal.exact(a, digits + 20))
    assert coarse.lo <= fine.lo and fine.hi <= coarse.hi


@settings(max_examples=200, deadline=None)
@given(rationals, rationals)
def test_compare_antisymmetry(a, b):
    x, y = IntervalReal.exact(a, 20), IntervalReal.exact(b, 20)
    assert compare(x, y) is compare(y, x).flip()


def test_results_do_not_depend_on_global_context():
    """Certified values must not change when the global gmpy2 context is
    shrunk; any Python-operator arithmetic on mpfr would show up here."""
    script = """
import sys, gmpy2
if sys.argv[1] == "low":
    gmpy2.get_context().precision = 12
from fractions import Fraction as F
from robinkit.highprec import IntervalReal, log_int, exp_gamma, pow_i
from robinkit.primes import accumulate, SieveConfig, find_beta_max
from robinkit.exception_finder import build_beta_table, integer_cutoff
from robinkit.families import nu2_threshold
from robinkit.ca import verify_robin_on_ca
a = accumulate(limit=300_000, cfg=SieveConfig(1 << 16, 1))
r = find_beta_max(F(1, 100), SieveConfig(1 << 16, 1))
t = build_beta_table(F(1, 4))
ca = verify_robin_on_ca(6.0, exact_rows=100)
vals = [-log_int(7, 100), exp_gamma(100), a.logsum, a.theta, r.loglog_n_beta_max, r.margin_at,
        nu2_threshold(3).rhs, ca.min_margin]
print([(v.lo.digits(16), v.hi.digits(16)) for v in vals], [integer_cutoff(t, k) for k in range(1, 8)])
"""
    outs = [subprocess.run([sys.executable, "-c", script, mode], capture_output=True, text=True, check=True).stdout
            for mode in ("default", "low")]
    assert outs[0] == outs[1]
