"""Family tests, the nu_2 threshold, odd-part and unconditional bounds, and
exact checks of the constants the proofs depend on.

Robin's inequality is known for n > 5040 when

* nu_2(n) <= 19, or nu_3(n) <= 12, nu_5(n) <= 7, nu_7(n) <= 6, nu_11(n) <= 5;
* nu_2(n) = k exceeds a threshold depending on the odd part c = n / 2^k:
  k log 2 > (log(2^19 c))^(1048576/1048575) - log c.

The threshold has two readings: the real inequality above (``derived``) and
the form with a ceiling, k > ceil(RHS / log 2) (``ceiled``, the default).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction


from .arith import Factorization, RobinResult, Verdict, bound_check, sigma_over_n
from .bulk import ODD_PART, UNCONDITIONAL, RangeReport, bound_scan
from .errors import DomainError, InvalidArgumentError, PrecisionError
from .highprec import (
    DEFAULT_DIGITS,
    CertifiedOrder,
    IntervalReal,
    ceil_int,
    floor_int,
    decide,
    exp_gamma,
    log_i,
    log_int,
    pow_i,
)

EXPONENT = Fraction(1048576, 1048575)
COROLLARY_FACTOR = Fraction(524288, 1048575)
UNCONDITIONAL_FACTOR = Fraction(10000005645, 10**10)
CROSSING_EPS = Fraction(1, 1771560)
DOUBLE_EXP_BOUND = "23.762143"
# Largest exponent of each small prime that on its own settles the question.
EXPONENT_WITNESSES = ((2, 19), (3, 12), (5, 7), (7, 6), (11, 5))


class ThresholdMode(enum.Enum):
    CEILED = "ceiled"  # k > ceil(RHS)
    DERIVED = "derived"  # k > RHS


@dataclass(frozen=True)
class Nu2Threshold:
    rhs: IntervalReal  # ((log 2^19 c)^(1048576/1048575) - log c) / log 2
    k_min: int  # smallest k with k > rhs
    k_ceiled: int  # smallest k with k > ceil(rhs)

    def admits(self, k: int, mode: ThresholdMode = ThresholdMode.CEILED) -> bool:
        return k >= (self.k_ceiled if mode is ThresholdMode.CEILED else self.k_min)


def _threshold_rhs(log_c: IntervalReal, digits: int) -> IntervalReal:
    log2 = log_int(2, digits)
    base = log2 * 19 + log_c
    return (pow_i(base, IntervalReal.exact(EXPONENT, digits)) - log_c) / log2


def nu2_threshold(c: int | Factorization | IntervalReal, digits: int = DEFAULT_DIGITS,
                  max_digits: int | None = None) -> Nu2Threshold:
    """Certified minimal nu_2 for which the threshold condition holds.

    ``c`` is the odd part: an int, its factorization, or an enclosure of
    log c (for odd parts too large to handle otherwise; no refinement then).
    """
    if isinstance(c, IntervalReal):
        log_c_at = lambda d: c  # noqa: E731
        fixed = True
    else:
        fac = c if isinstance(c, Factorization) else None
        if fac is None:
            c = int(c)
            if c < 1:
                raise InvalidArgumentError(f"c must be a positive odd integer, got {c}")
            if c % 2 == 0:
                raise InvalidArgumentError(f"c must be odd, got {c}")
            log_c_at = lambda d: log_int(c, d) if c > 1 else IntervalReal.exact(0, d)  # noqa: E731
        else:
            if fac.exponent(2):
                raise InvalidArgumentError("c must be odd")
            log_c_at = fac.log_value
        fixed = False
    ceiling = max_digits or 8 * digits
    d = digits
    while True:
        rhs = _threshold_rhs(log_c_at(d), d)
        lo_floor, hi_floor = floor_int(rhs.lo), floor_int(rhs.hi)
        lo_ceil, hi_ceil = ceil_int(rhs.lo), ceil_int(rhs.hi)
        if lo_floor == hi_floor and lo_ceil == hi_ceil:
            return Nu2Threshold(rhs, lo_floor + 1, lo_ceil + 1)
        if fixed or d >= ceiling:
            raise PrecisionError("threshold straddles an integer", required_digits=2 * d)
        d = min(2 * d, ceiling)


def threshold_inequality(k: int, c: int, digits: int = DEFAULT_DIGITS) -> CertifiedOrder:
    """Certified order of k log 2 against (log 2^19 c)^(1048576/1048575) - log c;
    GREATER means the defining inequality holds."""

    def build(d):
        log_c = log_int(c, d) if c > 1 else IntervalReal.exact(0, d)
        log2 = log_int(2, d)
        return log2 * k, pow_i(log2 * 19 + log_c, IntervalReal.exact(EXPONENT, d)) - log_c

    return decide(build, digits)


@dataclass
class FamilyVerdict:
    factorization: Factorization
    guaranteed: bool
    witnesses: list[str]
    threshold: Nu2Threshold
    mode: ThresholdMode
    within_briggs_range: bool  # n <= 10^(10^10); documented, never used as a witness
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        t = self.threshold
        return {
            "n": str(self.factorization),
            "guaranteed": self.guaranteed,
            "witnesses": self.witnesses,
            "nu2": self.factorization.exponent(2),
            "threshold_mode": self.mode.value,
            "threshold_rhs": t.rhs.format(20),
            "threshold_k_min": t.k_min,
            "threshold_k_ceiled": t.k_ceiled,
            "within_briggs_range": self.within_briggs_range,
            "notes": self.notes,
        }


def _exceeds_5040(f: Factorization, digits: int) -> bool:
    if f.log_value(30).hi < 20:
        return f.value > 5040
    return True


def classify(f: Factorization, mode: ThresholdMode | str = ThresholdMode.CEILED,
             digits: int = DEFAULT_DIGITS) -> FamilyVerdict:
    """Which of the known families guarantee Robin's inequality for n."""
    mode = ThresholdMode(mode)
    if not _exceeds_5040(f, digits):
        raise DomainError("classification needs n > 5040")
    witnesses = [f"nu{p}<={bound}" for p, bound in EXPONENT_WITNESSES if f.exponent(p) <= bound]
    k = f.exponent(2)
    odd = Factorization(tuple((p, a) for p, a in f.factors if p != 2), check=False)
    threshold = nu2_threshold(odd, digits)
    if threshold.admits(k, mode):
        witnesses.append("nu2>threshold")
    notes = []
    if threshold.admits(k, ThresholdMode.DERIVED) != threshold.admits(k, ThresholdMode.CEILED):
        notes.append(f"the two threshold readings disagree at nu2={k} "
                     f"(derived k_min={threshold.k_min}, ceiled k={threshold.k_ceiled})")
    # log10 n <= 10^10  <=>  log n <= 10^10 log 10
    briggs = bool(f.log_value(30).hi <= 10**10 * math.log(10) * (1 - 1e-12))
    return FamilyVerdict(f, bool(witnesses), witnesses, threshold, mode, briggs, notes)


# -- bound checks -----------------------------------------------------------


def corollary1_bound_check(c: int, digits: int = DEFAULT_DIGITS) -> RobinResult:
    """sigma(c)/c < (524288/1048575) e^gamma log log(2^19 c) for odd c."""
    c = int(c)
    if c < 1 or c % 2 == 0:
        raise InvalidArgumentError(f"c must be a positive odd integer, got {c}")
    from .arith import factorize

    f = factorize(c)
    lhs = sigma_over_n(f)

    def build(d):
        rhs = exp_gamma(d) * log_i(log_int(2**19 * c, d)) * IntervalReal.exact(COROLLARY_FACTOR, d)
        return IntervalReal.exact(lhs, d), rhs

    order = decide(build, digits)
    a, b = build(digits)
    return RobinResult(Verdict.from_order(order), False, a, b)


def corollary1_scan(lo: int, hi: int, **kw) -> RangeReport:
    """Every odd c in [lo, hi]; c = 1 is checked directly when included."""
    if lo < 1:
        raise InvalidArgumentError("lo must be >= 1")
    extra = []
    if lo <= 1:
        if corollary1_bound_check(1).verdict is not Verdict.HOLDS:
            extra.append(1)
        lo = 2
    report = bound_scan(lo, hi, ODD_PART, **kw)
    report.violators = sorted(extra + report.violators)
    return report


def unconditional_bound_check(f: Factorization, digits: int = DEFAULT_DIGITS) -> RobinResult:
    """sigma(n)/n < 1.0000005645 e^gamma log log n for n > 5040."""
    if not _exceeds_5040(f, digits):
        raise DomainError("the unconditional bound is stated for n > 5040")
    return bound_check(f, UNCONDITIONAL_FACTOR, digits)


def unconditional_scan(lo: int, hi: int, **kw) -> RangeReport:
    if lo <= 5040:
        raise DomainError("the unconditional bound is stated for n > 5040")
    return bound_scan(lo, hi, UNCONDITIONAL, **kw)


# -- constants --------------------------------------------------------------


@dataclass
class ConstantCheck:
    name: str
    passed: bool
    detail: str


def decimal_prefix(r: Fraction, places: int, rounded: bool = False) -> str:
    """Decimal expansion of r >= 0 cut to ``places`` places, truncated or
    rounded half up."""
    scaled = r * 10**places
    q = int(scaled + Fraction(1, 2)) if rounded else int(scaled)
    whole, frac = divmod(q, 10**places)
    return f"{whole}.{frac:0{places}d}"


def verify_proof_constants(digits: int = DEFAULT_DIGITS) -> list[ConstantCheck]:
    checks: list[ConstantCheck] = []

    def add(name, ok, detail):
        checks.append(ConstantCheck(name, bool(ok), detail))

    t1 = Fraction(1048575, 1048576) * Fraction(1771561, 1771560)
    gap = 1048576 * 1771560 - 1048575 * 1771561
    add("nu2<=19 factor times 1771561/1771560 < 1", t1 < 1,
        f"(1048575/1048576)(1771561/1771560) = {t1}; 1048576*1771560 - 1048575*1771561 = {gap}")

    chain2 = [1 - Fraction(1, 2 ** (1 + a)) for a in range(1, 20)]
    add("(1 - 2^-(1+a)) increases for a = 1..19", all(x < y for x, y in zip(chain2, chain2[1:])),
        f"from {chain2[0]} to {chain2[-1]}")

    powers = [5**8, 7**7, 3**13, 11**6]
    chain3 = [1 - Fraction(1, q) for q in powers]
    add("(1-5^-8) < (1-7^-7) < (1-3^-13) < (1-11^-6)", all(x < y for x, y in zip(chain3, chain3[1:])),
        " < ".join(map(str, powers)))

    ratio = Fraction(1771561, 1771560)
    # The quoted 18 places are the rounded value; truncation ends in ...684.
    shown = decimal_prefix(ratio, 18, rounded=True)
    add("1771561/1771560 to 18 places", shown == "1.000000564474248685",
        f"rounded {shown}, truncated {decimal_prefix(ratio, 18)}, next places {decimal_prefix(ratio, 24)}")
    add("1771561/1771560 < 1.0000005645", ratio < Fraction("1.0000005645"),
        f"1.0000005645 - ratio = {Fraction('1.0000005645') - ratio}")
    add("1 + 1/1771560 = 1771561/1771560", 1 + CROSSING_EPS == ratio, str(1 + CROSSING_EPS))
    add("(1771560/1771561)(1771561/1771560) = 1", Fraction(1771560, 1771561) * ratio == 1, "exact")
    add("sigma(2^19)/2^19 = 1048575/524288", Fraction(2**20 - 1, 2**19) == 1 / COROLLARY_FACTOR,
        "so the odd part carries the factor 524288/1048575")
    add("11^6 = 1771561", 11**6 == 1771561, "eps = 1/1771560 is 1/(11^6 - 1)")

    # e^(e^x) < 10^(10^10)  <=>  x < 10 log 10 + log log 10
    def build(d):
        x = IntervalReal.exact(DOUBLE_EXP_BOUND, d)
        ln10 = log_int(10, d)
        return x, ln10 * 10 + log_i(ln10)

    order = decide(build, digits)
    _, bound = build(digits)
    add("e^(e^23.762143) < 10^(10^10)", order is CertifiedOrder.LESS,
        f"23.762143 < 10 log 10 + log log 10 = {bound.format(12)}")
    return checks
