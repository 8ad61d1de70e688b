"""Exact integer arithmetic: factorization, divisor sums, totients, p-adic
orders and single-integer Robin checks."""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from operator import mul

import gmpy2

from .errors import CapacityError, InvalidArgumentError
from .highprec import (
    DEFAULT_DIGITS,
    CertifiedOrder,
    IntervalReal,
    decide,
    exp_gamma,
    log_i,
    log_int,
)

ExactRatio = Fraction

TRIAL_DIVISION_BOUND = 1 << 16
# Cofactors left after trial division must stay below this many decimal digits.
MAX_FACTOR_DIGITS = 45
_RHO_ITERATION_BUDGET = 1 << 26
_RHO_STRIP_BUDGET = 1 << 18  # enough to peel off factors below about 10^10

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
_MR_DETERMINISTIC_LIMIT = 3317044064679887385961981


def _small_primes(limit: int) -> list[int]:
    sieve = bytearray([1]) * (limit + 1)
    sieve[0:2] = b"\x00\x00"
    for p in range(2, math.isqrt(limit) + 1):
        if sieve[p]:
            sieve[p * p :: p] = bytearray(len(range(p * p, limit + 1, p)))
    return [i for i, flag in enumerate(sieve) if flag]


SMALL_PRIMES = _small_primes(TRIAL_DIVISION_BOUND)
_SMALL_PRIME_SET = frozenset(SMALL_PRIMES)


def is_prime(n: int) -> bool:
    """Primality test: deterministic Miller-Rabin below 3.3e24, BPSW above."""
    if n < 2:
        return False
    if n <= TRIAL_DIVISION_BOUND:
        return n in _SMALL_PRIME_SET
    for p in SMALL_PRIMES[:60]:
        if n % p == 0:
            return False
    if n < _MR_DETERMINISTIC_LIMIT:
        return all(gmpy2.is_strong_prp(n, a) for a in _MR_BASES)
    return bool(gmpy2.is_bpsw_prp(n)) and all(gmpy2.is_strong_prp(n, a) for a in _MR_BASES)


@dataclass(frozen=True)
class Factorization:
    """Prime-power decomposition with strictly increasing primes."""

    factors: tuple[tuple[int, int], ...] = ()
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        factors = tuple((int(p), int(a)) for p, a in self.factors)
        object.__setattr__(self, "factors", factors)
        if not self.check:
            return
        previous = 1
        for p, a in factors:
            if p <= previous:
                raise InvalidArgumentError("primes must be strictly increasing")
            if a < 1:
                raise InvalidArgumentError(f"exponent of {p} must be >= 1, got {a}")
            if not is_prime(p):
                raise InvalidArgumentError(f"{p} is not prime")
            previous = p

    @classmethod
    def from_dict(cls, exponents: dict[int, int]) -> "Factorization":
        return cls(tuple(sorted((p, a) for p, a in exponents.items() if a)))

    @classmethod
    def parse(cls, text: str) -> "Factorization":
        """Parse ``"2^25*3^2*7"``; a lone ``"1"`` is the empty factorization."""
        text = text.replace(" ", "")
        if text in ("", "1"):
            return cls()
        exponents: dict[int, int] = {}
        for part in text.split("*"):
            base, _, exp = part.partition("^")
            try:
                p, a = int(base), int(exp) if exp else 1
            except ValueError:
                raise InvalidArgumentError(f"malformed factor {part!r}") from None
            exponents[p] = exponents.get(p, 0) + a
        return cls.from_dict(exponents)

    @cached_property
    def value(self) -> int:
        return reduce(mul, (p**a for p, a in self.factors), 1)

    @property
    def omega(self) -> int:
        return len(self.factors)

    @property
    def primes(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.factors)

    def exponent(self, p: int) -> int:
        for q, a in self.factors:
            if q == p:
                return a
            if q > p:
                break
        return 0

    def log_value(self, digits: int = DEFAULT_DIGITS) -> IntervalReal:
        """Enclosure of log n computed from the factors (n is never built)."""
        total = IntervalReal.exact(0, digits)
        for p, a in self.factors:
            total = total + log_int(p, digits) * a
        return total

    def __str__(self) -> str:
        return "*".join(f"{p}^{a}" for p, a in self.factors) or "1"


def _pollard_brent(n: int, rng: random.Random, budget: int = _RHO_ITERATION_BUDGET) -> int:
    if n % 2 == 0:
        return 2
    spent = 0
    while True:
        y, c, m = rng.randrange(1, n), rng.randrange(1, n), 128
        g = r = q = 1
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = math.gcd(q, n)
                k += m
            r *= 2
            spent += r
            if spent > budget:
                raise CapacityError(f"Pollard rho budget exhausted on a {len(str(n))}-digit cofactor")
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = math.gcd(abs(x - ys), n)
        if g != n:
            return g


def _perfect_power(n: int) -> tuple[int, int]:
    """(r, k) with n = r^k and k as large as possible."""
    k_total = 1
    found = True
    while found and n > 3:
        found = False
        for k in SMALL_PRIMES:
            if k > n.bit_length():
                break
            r, exact = gmpy2.iroot(n, k)
            if exact:
                n, k_total, found = int(r), k_total * k, True
                break
    return n, k_total


def _split_power(root: int, k: int, out: dict[int, int], rng: random.Random) -> None:
    sub: dict[int, int] = {}
    _split(root, sub, rng)
    for p, a in sub.items():
        out[p] = out.get(p, 0) + a * k


def _split(n: int, out: dict[int, int], rng: random.Random) -> None:
    if n == 1:
        return
    if is_prime(n):
        out[n] = out.get(n, 0) + 1
        return
    root, k = _perfect_power(n)
    if k > 1:
        _split_power(root, k, out, rng)
        return
    d = _pollard_brent(n, rng)
    _split(d, out, rng)
    _split(n // d, out, rng)


def _split_cofactor(n: int, out: dict[int, int], rng: random.Random) -> None:
    """Factor what trial division left. Perfect powers are reduced and factors a
    short rho run finds are peeled off, so the size ceiling only sees the hard part."""
    while n > 1:
        root, k = _perfect_power(n)
        if len(str(root)) <= MAX_FACTOR_DIGITS or is_prime(root):
            _split_power(root, k, out, rng)
            return
        try:
            d = _pollard_brent(root, rng, _RHO_STRIP_BUDGET)
        except CapacityError:
            raise CapacityError(
                f"cofactor with {len(str(root))} digits exceeds the {MAX_FACTOR_DIGITS}-digit ceiling"
            ) from None
        found: dict[int, int] = {}
        _split(min(d, root // d), found, rng)
        for p in found:
            while n % p == 0:
                n //= p
                out[p] = out.get(p, 0) + 1


def factorize(n: int) -> Factorization:
    """Exact factorization: trial division below 2^16, then Pollard-Brent."""
    n = int(n)
    if n < 1:
        raise InvalidArgumentError(f"factorize requires n >= 1, got {n}")
    exponents: dict[int, int] = {}
    for p in SMALL_PRIMES:
        if p * p > n:
            break
        if n % p == 0:
            a = 0
            while n % p == 0:
                n //= p
                a += 1
            exponents[p] = a
    if n > 1:
        # Seeded for reproducible runtimes; the result does not depend on it.
        _split_cofactor(n, exponents, random.Random(n))
    return Factorization(tuple(sorted(exponents.items())), check=False)


def sigma_over_n(f: Factorization) -> Fraction:
    result = Fraction(1)
    for p, a in f.factors:
        result *= Fraction(p ** (a + 1) - 1, p**a * (p - 1))
    return result


def n_over_phi(f: Factorization) -> Fraction:
    result = Fraction(1)
    for p, _ in f.factors:
        result *= Fraction(p, p - 1)
    return result


def lemma1_product(f: Factorization) -> Fraction:
    """prod (1 - p^-(1+a)); multiplying by n/phi(n) gives sigma(n)/n."""
    result = Fraction(1)
    for p, a in f.factors:
        result *= 1 - Fraction(1, p ** (a + 1))
    return result


def sigma(n: int) -> int:
    f = factorize(n)
    return reduce(mul, ((p ** (a + 1) - 1) // (p - 1) for p, a in f.factors), 1)


def p_adic_order(f: Factorization, p: int) -> int:
    if not is_prime(p):
        raise InvalidArgumentError(f"{p} is not prime")
    return f.exponent(p)


class Verdict(enum.Enum):
    HOLDS = "Holds"
    FAILS = "Fails"
    UNDECIDED = "Undecided"

    @classmethod
    def from_order(cls, order: CertifiedOrder) -> "Verdict":
        """LESS means the inequality under test holds."""
        return {
            CertifiedOrder.LESS: cls.HOLDS,
            CertifiedOrder.GREATER: cls.FAILS,
            CertifiedOrder.UNDECIDED: cls.UNDECIDED,
        }[order]


@dataclass(frozen=True)
class RobinResult:
    verdict: Verdict
    out_of_domain: bool = False
    lhs: IntervalReal | None = None
    rhs: IntervalReal | None = None

    @property
    def margin(self) -> IntervalReal | None:
        if self.lhs is None:
            return None
        return self.rhs - self.lhs


def ratio_interval(r: Fraction, digits: int) -> IntervalReal:
    return IntervalReal.exact(r, digits)


def loglog_interval(f: Factorization, digits: int) -> IntervalReal:
    return log_i(f.log_value(digits))


def bound_check(
    f: Factorization,
    factor: Fraction = Fraction(1),
    digits: int = DEFAULT_DIGITS,
    max_digits: int | None = None,
) -> RobinResult:
    """Certified test of sigma(n)/n < factor * e^gamma * log log n, n >= 3."""
    lhs_exact = sigma_over_n(f)

    def build(d):
        rhs = exp_gamma(d) * loglog_interval(f, d) * IntervalReal.exact(factor, d)
        return IntervalReal.exact(lhs_exact, d), rhs

    order = decide(build, digits, max_digits)
    lhs, rhs = build(digits)
    return RobinResult(Verdict.from_order(order), False, lhs, rhs)


def robin_check(
    f: Factorization, digits: int = DEFAULT_DIGITS, max_digits: int | None = None
) -> RobinResult:
    """Certified verdict on sigma(n)/n < e^gamma log log n.

    n = 1 and n = 2 have log log n undefined or negative; they are reported as
    FAILS with ``out_of_domain`` set.
    """
    if f.factors in ((), ((2, 1),)):
        return RobinResult(Verdict.FAILS, out_of_domain=True)
    return bound_check(f, Fraction(1), digits, max_digits)
