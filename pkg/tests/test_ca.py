from fractions import Fraction

import gmpy2
import mpmath
import pytest

import oracles
from robinkit.arith import Verdict, sigma_over_n
from robinkit.ca import (
    INDEX_5040,
    ca_sequence,
    ca_values_upto,
    compare_transitions,
    critical_eps,
    critical_eps_float,
    gap_check,
    verify_robin_on_ca,
)
from robinkit.errors import CapacityError

FIRST_TEN = [2, 6, 12, 60, 120, 360, 2520, 5040, 55440, 720720]


def test_first_ten_match_brute_force_oracle():
    assert oracles.ca_brute(10**6) == FIRST_TEN
    got = [ca.value for ca in ca_sequence(4.0)][:10]
    assert got == FIRST_TEN


def test_all_ca_below_1e6_agree_with_oracle():
    assert ca_values_upto(10**6) == oracles.ca_brute(10**6)


def test_critical_values():
    # eps_p(a) = log(1 + 1/(p + ... + p^(a+1))) / log p
    assert abs(critical_eps_float(2, 1) - 0.222392421336448) < 1e-12
    m = mpmath.MPContext()
    m.dps = 60
    for (p, a), ref in (((2, 1), m.log(m.mpf(7) / 6) / m.log(2)), ((3, 0), m.log(m.mpf(4) / 3) / m.log(3))):
        iv = critical_eps(p, a)
        v, tol = gmpy2.mpq(m.nstr(ref, 55)), gmpy2.mpq(1, 10**50)
        assert iv.lo <= v + tol and v - tol <= iv.hi
        assert abs(float(iv.mid) - critical_eps_float(p, a)) < 1e-15
    # eps_3(0) = 0.2619 > eps_2(1) = 0.2224, so the factor 3 enters first
    assert compare_transitions((2, 1), (3, 0)) == 1 and compare_transitions((3, 0), (2, 1)) == -1


def test_sequence_structure():
    seq = list(ca_sequence(6.0))
    values = [ca.value for ca in seq]
    for a, b, ca in zip(values, values[1:], seq[1:]):
        assert b % a == 0 and gmpy2.is_prime(b // a)
        assert b // a == ca.prime
    for ca in seq:
        exps = [e for _, e in ca.factorization.factors]
        assert exps == sorted(exps, reverse=True)
        assert ca.factorization.primes == tuple(int(p) for p in gmpy2_primes(ca.omega))


def gmpy2_primes(k):
    out, p = [], 2
    while len(out) < k:
        out.append(p)
        p = int(gmpy2.next_prime(p))
    return out


def test_enclosures_contain_exact_values():
    for ca in ca_sequence(3.4):
        n = ca.value
        if n > 10**12:
            break
        r = sigma_over_n(ca.factorization)
        ctx = gmpy2.context(precision=800)
        exact_log_ratio = ctx.log(gmpy2.mpq(r.numerator, r.denominator))
        assert ca.log_sigma_ratio.lo <= exact_log_ratio <= ca.log_sigma_ratio.hi
        assert ca.log_n.lo <= ctx.log(n) <= ca.log_n.hi


def test_verify_small_report():
    rep = verify_robin_on_ca(3.0)
    by_index = {row.index: row for row in rep.rows}
    assert by_index[1].verdict is Verdict.FAILS and by_index[1].out_of_domain  # n = 2
    row_5040 = by_index[INDEX_5040]
    assert row_5040.verdict is Verdict.FAILS
    assert abs(float(row_5040.sigma_ratio) - 3.8381) < 1e-4 and abs(float(row_5040.rhs) - 3.8168) < 1e-4
    row_55440 = by_index[INDEX_5040 + 1]
    assert row_55440.verdict is Verdict.HOLDS and row_55440.margin.lo > 0
    # sigma(55440)/55440 = 1612/385 exactly (divisor enumeration)
    assert Fraction(oracles.sigma(55440), 55440) == Fraction(1612, 385)
    m = mpmath.MPContext()
    m.dps = 50
    rhs_ref = m.exp(m.euler) * m.log(m.log(55440))  # 4.2583230182...
    assert abs(float(row_55440.sigma_ratio) - 1612 / 385) < 1e-12 and abs(float(row_55440.rhs) - float(rhs_ref)) < 1e-12
    assert rep.all_hold_above_5040 and rep.fails == INDEX_5040


def test_vectorised_path_agrees_with_exact_rows():
    """Same range, once fully with intervals and once mostly vectorised."""
    exact = verify_robin_on_ca(9.0, exact_rows=10**6)
    fast = verify_robin_on_ca(9.0, exact_rows=50)
    assert (exact.count, exact.holds, exact.fails) == (fast.count, fast.holds, fast.fails)
    assert exact.min_margin_index == fast.min_margin_index
    assert fast.min_margin.lo <= exact.min_margin.lo and exact.min_margin.hi <= fast.min_margin.hi
    assert exact.largest_prime == fast.largest_prime


def test_csv_is_deterministic():
    a = verify_robin_on_ca(7.0, exact_rows=100).csv_text()
    b = verify_robin_on_ca(7.0, exact_rows=100).csv_text()
    assert a == b and a.startswith("index,loglog_n,sigma_ratio,rhs,margin,verdict\n")


def test_gap_checks():
    assert gap_check(5040, 55440).violators_above_5040 == []
    g = gap_check(720720, 1441440)
    assert g.scan.violators == [] and g.scan.checked == 720720
    empty = gap_check(5040, 5040)
    assert empty.scan is None and empty.violators_above_5040 == []
    with pytest.raises(CapacityError):
        gap_check(720720, 1441440, exhaustive_limit=10**6)


def test_ca_values_upto_1e8():
    assert ca_values_upto(10**8) == FIRST_TEN + [1441440, 4324320, 21621600]
