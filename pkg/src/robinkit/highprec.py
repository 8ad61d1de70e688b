"""Certified real arithmetic on top of MPFR (via gmpy2).

An :class:`IntervalReal` is a closed interval ``[lo, hi]`` whose endpoints are
MPFR numbers rounded outward, so every operation returns an enclosure of the
exact mathematical result.  Strict inequalities are decided by
:func:`compare`, which answers only when two enclosures are disjoint.

Working precision is expressed in decimal digits; the binary precision used
internally is ``ceil(digits * log2(10))`` plus a few guard bits.  Directed
rounding contexts are created explicitly and never installed globally, so
all functions here are pure and thread safe.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import gmpy2
from gmpy2 import mpfr, mpq, mpz

from .errors import DomainError, InvalidArgumentError, PrecisionError

DEFAULT_DIGITS = int(os.environ.get("ROBINKIT_DIGITS", "200"))
MIN_GAMMA_DIGITS = 10
GUARD_BITS = 8
_LOG2_10 = math.log2(10)


def digits_to_bits(digits: int) -> int:
    return math.ceil(digits * _LOG2_10) + GUARD_BITS


@lru_cache(maxsize=None)
def _contexts(bits: int):
    common = dict(
        precision=bits,
        emax=gmpy2.get_emax_max(),
        emin=gmpy2.get_emin_min(),
        trap_invalid=False,
        trap_divzero=False,
    )
    return (
        gmpy2.context(round=gmpy2.RoundDown, **common),
        gmpy2.context(round=gmpy2.RoundUp, **common),
        gmpy2.context(round=gmpy2.RoundToNearest, **common),
    )


def directed(digits: int):
    """Return the (round-down, round-up) MPFR contexts for ``digits``."""
    down, up, _ = _contexts(digits_to_bits(digits))
    return down, up


class CertifiedOrder(enum.Enum):
    LESS = "Less"
    GREATER = "Greater"
    UNDECIDED = "Undecided"

    def flip(self) -> "CertifiedOrder":
        if self is CertifiedOrder.LESS:
            return CertifiedOrder.GREATER
        if self is CertifiedOrder.GREATER:
            return CertifiedOrder.LESS
        return self


Number = "int | Fraction | str | float | mpfr | mpq | IntervalReal"


@dataclass(frozen=True)
class IntervalReal:
    lo: mpfr
    hi: mpfr
    digits: int = DEFAULT_DIGITS

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise InvalidArgumentError(f"interval endpoints out of order: [{self.lo}, {self.hi}]")

    # -- construction -------------------------------------------------------

    @classmethod
    def exact(cls, value, digits: int = DEFAULT_DIGITS) -> "IntervalReal":
        """Tightest enclosure of an exactly known value.

        Accepts ints, Fractions/mpq, decimal strings, floats and mpfr values.
        """
        if isinstance(value, IntervalReal):
            return value
        down, up = directed(digits)
        if isinstance(value, Fraction):
            value = mpq(value.numerator, value.denominator)
        elif isinstance(value, (int, mpz)) and not isinstance(value, bool):
            value = mpz(value)
        elif isinstance(value, float):
            if not math.isfinite(value):
                raise InvalidArgumentError(f"non-finite value {value!r}")
        elif not isinstance(value, (str, mpfr, mpq)):
            raise InvalidArgumentError(f"cannot enclose value of type {type(value).__name__}")
        lo = mpfr(value, 0, context=down)
        hi = mpfr(value, 0, context=up)
        return cls(lo, hi, digits)

    @classmethod
    def hull(cls, *items: "IntervalReal") -> "IntervalReal":
        return cls(min(i.lo for i in items), max(i.hi for i in items), max(i.digits for i in items))

    # -- inspection ---------------------------------------------------------

    @property
    def precision_digits(self) -> int:
        return self.digits

    @property
    def width(self) -> mpfr:
        _, up = directed(self.digits)
        return up.sub(self.hi, self.lo)

    @property
    def mid(self) -> mpfr:
        _, _, near = _contexts(digits_to_bits(self.digits))
        return near.div(near.add(self.lo, self.hi), 2)

    def contains(self, value) -> bool:
        other = IntervalReal.exact(value, self.digits)
        return self.lo <= other.lo and other.hi <= self.hi

    def overlaps(self, other: "IntervalReal") -> bool:
        return not (self.hi < other.lo or other.hi < self.lo)

    def is_positive(self) -> bool:
        return self.lo > 0

    def is_negative(self) -> bool:
        return self.hi < 0

    def __float__(self) -> float:
        return float(self.mid)

    def format(self, sig: int = 20) -> str:
        """Midpoint rounded to ``sig`` significant digits."""
        return sci(self.mid, sig)

    def __repr__(self) -> str:
        return f"IntervalReal([{self.lo:.25g}, {self.hi:.25g}], digits={self.digits})"

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> "IntervalReal":
        if isinstance(other, IntervalReal):
            return other
        return IntervalReal.exact(other, self.digits)

    def _digits(self, other: "IntervalReal") -> int:
        return max(self.digits, other.digits)

    def __add__(self, other):
        other = self._coerce(other)
        d = self._digits(other)
        down, up = directed(d)
        return IntervalReal(down.add(self.lo, other.lo), up.add(self.hi, other.hi), d)

    __radd__ = __add__

    def __neg__(self):
        # Python's unary minus would round in the global context.
        down, up = directed(self.digits)
        return IntervalReal(down.minus(self.hi), up.minus(self.lo), self.digits)

    def __sub__(self, other):
        other = self._coerce(other)
        d = self._digits(other)
        down, up = directed(d)
        return IntervalReal(down.sub(self.lo, other.hi), up.sub(self.hi, other.lo), d)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        d = self._digits(other)
        down, up = directed(d)
        pairs = [(self.lo, other.lo), (self.lo, other.hi), (self.hi, other.lo), (self.hi, other.hi)]
        lo = min(down.mul(x, y) for x, y in pairs)
        hi = max(up.mul(x, y) for x, y in pairs)
        return IntervalReal(lo, hi, d)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other.lo <= 0 <= other.hi:
            raise DomainError(f"division by an interval containing zero: {other!r}")
        d = self._digits(other)
        down, up = directed(d)
        pairs = [(self.lo, other.lo), (self.lo, other.hi), (self.hi, other.lo), (self.hi, other.hi)]
        lo = min(down.div(x, y) for x, y in pairs)
        hi = max(up.div(x, y) for x, y in pairs)
        return IntervalReal(lo, hi, d)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __lt__(self, other):
        return compare(self, self._coerce(other)) is CertifiedOrder.LESS

    def __gt__(self, other):
        return compare(self, self._coerce(other)) is CertifiedOrder.GREATER


def floor_int(x: mpfr) -> int:
    """Exact floor; gmpy2.floor and math.floor round in the global context."""
    t = int(x)  # truncation is exact
    return t - 1 if t > x else t


def ceil_int(x: mpfr) -> int:
    t = int(x)
    return t + 1 if t < x else t


def sci(x: mpfr, sig: int = 20) -> str:
    """Scientific notation with ``sig`` significant digits (round to nearest)."""
    if not gmpy2.is_finite(x):
        return str(x)
    mant, exp, _ = x.digits(10, sig)
    sign = "-" if mant.startswith("-") else ""
    mant = mant.lstrip("-")
    if set(mant) <= {"0"}:
        return f"{sign}{'0.' + '0' * (sig - 1) if sig > 1 else '0'}e+00"
    frac = f".{mant[1:]}" if sig > 1 else ""
    return f"{sign}{mant[0]}{frac}e{exp - 1:+03d}"


# -- elementary functions ---------------------------------------------------


def exp_i(x: IntervalReal) -> IntervalReal:
    down, up = directed(x.digits)
    return IntervalReal(down.exp(x.lo), up.exp(x.hi), x.digits)


def log_i(x: IntervalReal) -> IntervalReal:
    if not x.lo > 0:
        raise DomainError(f"log of an interval that is not strictly positive: {x!r}")
    down, up = directed(x.digits)
    return IntervalReal(down.log(x.lo), up.log(x.hi), x.digits)


def log1p_i(x: IntervalReal) -> IntervalReal:
    if not x.lo > -1:
        raise DomainError(f"log1p of an interval reaching -1: {x!r}")
    down, up = directed(x.digits)
    return IntervalReal(down.log1p(x.lo), up.log1p(x.hi), x.digits)


def pow_i(x: IntervalReal, y: IntervalReal) -> IntervalReal:
    """``x ** y`` for a strictly positive base."""
    if not isinstance(y, IntervalReal):
        y = IntervalReal.exact(y, x.digits)
    if not x.lo > 0:
        raise DomainError(f"pow with a base that is not strictly positive: {x!r}")
    d = max(x.digits, y.digits)
    if x.lo >= 1 and y.lo >= 0:
        down, up = directed(d)
        return IntervalReal(down.pow(x.lo, y.lo), up.pow(x.hi, y.hi), d)
    return exp_i(y * log_i(x))


@lru_cache(maxsize=64)
def const_euler_gamma(digits: int = DEFAULT_DIGITS) -> IntervalReal:
    """Enclosure of the Euler-Mascheroni constant, width <= 10**(1 - digits)."""
    if digits < MIN_GAMMA_DIGITS:
        raise InvalidArgumentError(f"digits must be >= {MIN_GAMMA_DIGITS}, got {digits}")
    down, up = directed(digits)
    return IntervalReal(down.const_euler(), up.const_euler(), digits)


@lru_cache(maxsize=64)
def exp_gamma(digits: int = DEFAULT_DIGITS) -> IntervalReal:
    return exp_i(const_euler_gamma(digits))


@lru_cache(maxsize=256)
def log_int(n: int, digits: int = DEFAULT_DIGITS) -> IntervalReal:
    return log_i(IntervalReal.exact(n, digits))


# -- comparison -------------------------------------------------------------


def _order(a: IntervalReal, b: IntervalReal) -> CertifiedOrder:
    if a.hi < b.lo:
        return CertifiedOrder.LESS
    if a.lo > b.hi:
        return CertifiedOrder.GREATER
    return CertifiedOrder.UNDECIDED


def compare(
    a: IntervalReal,
    b: IntervalReal,
    max_digits: int | None = None,
    refine: Callable[[int], tuple[IntervalReal, IntervalReal]] | None = None,
) -> CertifiedOrder:
    """Certified ordering of two enclosures.

    Without ``refine`` the answer is UNDECIDED whenever the intervals overlap.
    With ``refine(digits) -> (a, b)`` the comparison is retried at doubled
    precision until it is decided or ``max_digits`` is reached.
    """
    order = _order(a, b)
    if order is not CertifiedOrder.UNDECIDED or refine is None:
        return order
    digits = max(a.digits, b.digits)
    ceiling = max_digits if max_digits is not None else 8 * digits
    while digits < ceiling:
        digits = min(2 * digits, ceiling)
        a, b = refine(digits)
        order = _order(a, b)
        if order is not CertifiedOrder.UNDECIDED:
            return order
    return CertifiedOrder.UNDECIDED


def decide(
    build: Callable[[int], tuple[IntervalReal, IntervalReal]],
    digits: int = DEFAULT_DIGITS,
    max_digits: int | None = None,
) -> CertifiedOrder:
    """Evaluate ``build(digits)`` and compare, refining on overlap."""
    a, b = build(digits)
    return compare(a, b, max_digits=max_digits, refine=build)


def require_decided(order: CertifiedOrder, what: str, digits: int | None = None) -> CertifiedOrder:
    if order is CertifiedOrder.UNDECIDED:
        raise PrecisionError(f"comparison undecided at maximum precision: {what}", digits)
    return order
