"""Colossally abundant numbers and Robin's inequality along them.

Raising the exponent of p from a to a + 1 multiplies sigma(n)/n^(1+eps) by

    (1 + 1/S) / p^eps,   S = p + p^2 + ... + p^(a+1),

so the step pays off exactly while eps < eps_p(a) = log1p(1/S) / log p.  The
CA numbers are therefore produced by applying the transitions (p, a) in
decreasing order of eps_p(a), one prime factor at a time.  Along the
sequence

    log n             grows by log p,
    log(sigma(n)/n)   grows by log1p(1/S),

which is all that is needed to test Robin's inequality in log space.
"""

from __future__ import annotations

import bisect
import csv
import functools
import heapq
import io
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .arith import Factorization, Verdict
from .bulk import RangeReport, robin_scan
from .errors import CapacityError, InvalidArgumentError, PrecisionError
from .highprec import (
    DEFAULT_DIGITS,
    CertifiedOrder,
    IntervalReal,
    compare,
    directed,
    exp_gamma,
    exp_i,
    log1p_i,
    log_i,
    log_int,
    sci,
)
from .primes import _blocked_cumsum, _exact_fsum, prime_chunks, simple_sieve

log = logging.getLogger(__name__)

MAX_DECIMAL_DIGITS = 10_000
TIE_TOLERANCE = 1e-12
EXACT_ROWS = 10_000
_U = 2.0**-53
# numpy's log/log1p are assumed accurate to 4 ulp; every term carries that radius.
_LIBM_REL = 2.0**-50
EULER_GAMMA = 0.57721566490153286061


def _geometric(p: int, a: int) -> int:
    """S = p + p^2 + ... + p^(a+1)."""
    return p * (p ** (a + 1) - 1) // (p - 1)


def critical_eps_float(p: int, a: int) -> float:
    return math.log1p(1.0 / _geometric(p, a)) / math.log(p)


@lru_cache(maxsize=4096)
def critical_eps(p: int, a: int, digits: int = DEFAULT_DIGITS) -> IntervalReal:
    """eps_p(a) = log((p^(a+2) - 1)/(p^(a+1) - 1)) / log p - 1."""
    inv = IntervalReal.exact(Fraction(1, _geometric(p, a)), digits)
    return log1p_i(inv) / log_int(p, digits)


def compare_transitions(t1: tuple[int, int], t2: tuple[int, int], digits: int = DEFAULT_DIGITS) -> int:
    """-1 if t1 comes first (larger critical value), 1 if t2 does."""
    order = compare(critical_eps(*t1, digits), critical_eps(*t2, digits), 8 * digits,
                    refine=lambda d: (critical_eps(*t1, d), critical_eps(*t2, d)))
    if order is CertifiedOrder.UNDECIDED:
        raise PrecisionError(f"critical values of {t1} and {t2} tie at maximum precision", 8 * digits)
    return -1 if order is CertifiedOrder.GREATER else 1


def _resolve_ties(entries: list[tuple[int, int]], digits: int) -> list[tuple[int, int]]:
    if len(entries) > 1:
        log.info("near-tie among transitions %s resolved by interval comparison", entries)
    return sorted(entries, key=functools.cmp_to_key(lambda x, y: compare_transitions(x, y, digits)))


def _all_primes() -> Iterator[int]:
    lo, width = 2, 1 << 22
    while True:
        for chunk in prime_chunks(lo + width - 1, start=lo):
            yield from chunk.tolist()
        lo += width


@dataclass(frozen=True)
class CANumber:
    index: int
    omega: int  # the first ``omega`` primes divide n
    high: tuple[tuple[int, int], ...]  # (p, a) with a >= 2, in increasing p
    log_n: IntervalReal
    log_sigma_ratio: IntervalReal
    prime: int  # the prime multiplied in to reach this element
    eps: float  # critical value of that transition

    @property
    def factorization(self) -> Factorization:
        if self.omega > 100_000:
            raise CapacityError("factorization too long to materialise")
        primes = simple_sieve(max(16, int(self.omega * (math.log(self.omega + 2) + math.log(math.log(self.omega + 2)) + 3))))
        exps = dict(self.high)
        return Factorization(tuple((p, exps.get(p, 1)) for p in primes[: self.omega].tolist()), check=False)

    @property
    def value(self) -> int:
        if float(self.log_n.hi) > MAX_DECIMAL_DIGITS * math.log(10):
            raise CapacityError(f"n has more than {MAX_DECIMAL_DIGITS} decimal digits")
        return self.factorization.value

    @property
    def loglog_n(self) -> IntervalReal:
        return log_i(self.log_n)


@dataclass
class _SeqState:
    digits: int
    exps: dict = field(default_factory=dict)
    high: dict = field(default_factory=dict)
    omega: int = 0
    index: int = 0
    log_n: IntervalReal | None = None
    log_sig: IntervalReal | None = None
    last_eps: float = math.inf


def _generate(max_loglog_n: float, digits: int, state: _SeqState, limit_rows: int | None = None) -> Iterator[CANumber]:
    if max_loglog_n < 1:
        raise InvalidArgumentError("max_loglog_n must be >= 1")
    log_limit = exp_i(IntervalReal.exact(str(max_loglog_n), digits))
    primes = _all_primes()
    next_new = next(primes)
    heap = [(-critical_eps_float(next_new, 0), next_new, 0)]
    state.log_n = IntervalReal.exact(0, digits)
    state.log_sig = IntervalReal.exact(0, digits)
    while limit_rows is None or state.index < limit_rows:
        neg, p, a = heapq.heappop(heap)
        group = [(p, a)]
        while heap and heap[0][0] - neg <= TIE_TOLERANCE * -neg:
            _, q, b = heapq.heappop(heap)
            group.append((q, b))
        if len(group) > 1:
            group = _resolve_ties(group, digits)
            for q, b in group[1:]:
                heapq.heappush(heap, (-critical_eps_float(q, b), q, b))
            p, a = group[0]
        log_n = state.log_n + log_int(p, digits)
        order = compare(log_n, log_limit)
        if order is CertifiedOrder.GREATER:
            heapq.heappush(heap, (-critical_eps_float(p, a), p, a))
            return
        if order is CertifiedOrder.UNDECIDED:
            raise PrecisionError(f"log log n against the limit undecided at index {state.index + 1}", 2 * digits)
        if a == 0:
            next_new = next(primes)
            heapq.heappush(heap, (-critical_eps_float(next_new, 0), next_new, 0))
            state.omega += 1
        else:
            prev = _prime_before(p)
            if prev and state.exps[prev] < a + 1:
                raise AssertionError(f"exponents stopped being non-increasing at p={p}")
        state.exps[p] = a + 1
        if a + 1 >= 2:
            state.high[p] = a + 1
        heapq.heappush(heap, (-critical_eps_float(p, a + 1), p, a + 1))
        state.log_n = log_n
        state.log_sig = state.log_sig + log1p_i(IntervalReal.exact(Fraction(1, _geometric(p, a)), digits))
        state.index += 1
        state.last_eps = critical_eps_float(p, a)
        high = tuple(sorted(state.high.items()))
        yield CANumber(state.index, state.omega, high, state.log_n, state.log_sig, p, state.last_eps)


@lru_cache(maxsize=1)
def _small_prime_list() -> tuple[int, ...]:
    return tuple(simple_sieve(1 << 20).tolist())


def _prime_before(p: int) -> int | None:
    small = _small_prime_list()
    if p <= small[-1]:
        i = bisect.bisect_left(small, p)
        return small[i - 1] if i else None
    return None  # far beyond any exponent >= 2 at desk scale


def ca_sequence(max_loglog_n: float, digits: int = DEFAULT_DIGITS) -> Iterator[CANumber]:
    """CA numbers in increasing order while log log n <= max_loglog_n."""
    yield from _generate(max_loglog_n, digits, _SeqState(digits))


# -- Robin along the sequence ----------------------------------------------


@dataclass
class CARow:
    index: int
    loglog_n: float | IntervalReal
    sigma_ratio: float | IntervalReal
    rhs: float | IntervalReal
    margin: IntervalReal
    verdict: Verdict
    out_of_domain: bool = False

    def csv_row(self) -> list[str]:
        def fmt(v):
            return v.format(20) if isinstance(v, IntervalReal) else sci(mpfr(v, 53), 20)

        return [str(self.index), fmt(self.loglog_n), fmt(self.sigma_ratio), fmt(self.rhs),
                fmt(self.margin), self.verdict.value + (" (out of domain)" if self.out_of_domain else "")]


@dataclass
class CAReport:
    max_loglog_n: float
    digits: int
    count: int = 0
    holds: int = 0
    fails: int = 0
    undecided: int = 0
    rows: list[CARow] = field(default_factory=list)  # leading rows, flagged rows, min-margin row
    flagged: list[int] = field(default_factory=list)  # index of any non-Holds row above 5040
    min_margin: IntervalReal | None = None
    min_margin_index: int | None = None
    min_margin_loglog: float | None = None
    min_row: CARow | None = None
    last_loglog: float | None = None
    largest_prime: int | None = None
    exact_rows: int = 0

    @property
    def all_hold_above_5040(self) -> bool:
        return not self.flagged and self.min_margin is not None and self.min_margin.lo > 0

    def summary(self) -> dict:
        return {
            "max_loglog_n": self.max_loglog_n,
            "digits": self.digits,
            "count": self.count,
            "holds": self.holds,
            "fails": self.fails,
            "undecided": self.undecided,
            "flagged_above_5040": self.flagged,
            "all_hold_above_5040": self.all_hold_above_5040,
            "exact_rows": self.exact_rows,
            "min_margin_above_5040": None if self.min_margin is None else {
                "index": self.min_margin_index,
                "loglog_n": sci(mpfr(self.min_margin_loglog, 53), 17),
                "lo": sci(self.min_margin.lo, 20),
                "hi": sci(self.min_margin.hi, 20),
            },
            "last_loglog_n": None if self.last_loglog is None else sci(mpfr(self.last_loglog, 53), 17),
            "largest_prime": self.largest_prime,
        }

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "loglog_n", "sigma_ratio", "rhs", "margin", "verdict"])
        for row in sorted(self.rows, key=lambda r: r.index):
            w.writerow(row.csv_row())
        return buf.getvalue()


INDEX_5040 = 8


def _exact_row(ca: CANumber, digits: int) -> CARow:
    sig = exp_i(ca.log_sigma_ratio)
    if ca.log_n.hi < 1:  # n = 2: log log n < 0
        rhs = exp_gamma(digits) * log_i(ca.log_n)
        return CARow(ca.index, log_i(ca.log_n), sig, rhs, rhs - sig, Verdict.FAILS, True)
    loglog = log_i(ca.log_n)
    rhs = exp_gamma(digits) * loglog
    margin = rhs - sig
    verdict = Verdict.HOLDS if margin.lo > 0 else Verdict.FAILS if margin.hi < 0 else Verdict.UNDECIDED
    return CARow(ca.index, loglog, sig, rhs, margin, verdict)


def _record(report: CAReport, row: CARow, keep: bool) -> None:
    report.count += 1
    if row.verdict is Verdict.HOLDS:
        report.holds += 1
    elif row.verdict is Verdict.FAILS:
        report.fails += 1
    else:
        report.undecided += 1
    above = row.index > INDEX_5040
    if above and row.verdict is not Verdict.HOLDS:
        report.flagged.append(row.index)
        keep = True
    if keep:
        report.rows.append(row)
    if above and (report.min_margin is None or row.margin.lo < report.min_margin.lo):
        report.min_margin = row.margin
        report.min_margin_index = row.index
        report.min_margin_loglog = float(row.loglog_n)
        report.min_row = row


def verify_robin_on_ca(max_loglog_n: float = 20.0, digits: int = DEFAULT_DIGITS,
                       exact_rows: int = EXACT_ROWS, keep_rows: int = EXACT_ROWS) -> CAReport:
    """Robin's inequality on every CA number with log log n <= max_loglog_n.

    The first ``exact_rows`` elements use the interval generator; the rest
    continue from its exact state in vectorised double precision with
    explicit error radii (rows whose sign is not certified that way are
    recomputed from exact partial sums).
    """
    report = CAReport(max_loglog_n, digits, exact_rows=exact_rows)
    state = _SeqState(digits)
    for ca in _generate(max_loglog_n, digits, state, limit_rows=exact_rows):
        row = _exact_row(ca, digits)
        _record(report, row, ca.index <= keep_rows)
        report.last_loglog = float(row.loglog_n)
        report.largest_prime = max(report.largest_prime or 0, ca.prime)
    if state.index == exact_rows:
        _continue_vectorised(report, state, max_loglog_n, digits)
    if report.min_row is not None and all(r.index != report.min_row.index for r in report.rows):
        report.rows.append(report.min_row)
    return report


def _sorted_high(transitions: list[tuple[int, int]], digits: int) -> list[tuple[float, int, int]]:
    items = sorted(((critical_eps_float(p, a), p, a) for p, a in transitions), key=lambda t: (-t[0], t[1]))
    # Certify the order of neighbours that the doubles cannot separate.
    i = 0
    while i < len(items) - 1:
        j = i
        while j + 1 < len(items) and items[j][0] - items[j + 1][0] <= TIE_TOLERANCE * items[j][0]:
            j += 1
        if j > i:
            ordered = _resolve_ties([(p, a) for _, p, a in items[i : j + 1]], digits)
            items[i : j + 1] = [(critical_eps_float(p, a), p, a) for p, a in ordered]
        i = j + 1
    return items


def _continue_vectorised(report: CAReport, state: _SeqState, max_loglog_n: float, digits: int) -> None:
    down, up = directed(digits)
    log_limit = exp_i(IntervalReal.exact(str(max_loglog_n), digits))
    limit_lo, limit_hi = float(log_limit.lo), float(log_limit.hi)
    # theta(x) > 0.85 x for x >= 10^4, so no new prime beyond this bound is reached.
    p_bound = int(limit_hi / 0.85) + 10_000
    eps_min = math.log1p(1.0 / p_bound) / math.log(p_bound) * (1 - 1e-9)
    next_new = max(state.exps) if state.exps else 1
    high: list[tuple[int, int]] = []
    for p in simple_sieve(max(16, int(math.sqrt(1.0 / eps_min)) + 10)).tolist():
        a = max(1, state.exps.get(p, 0))
        if critical_eps_float(p, a) < eps_min:
            if a == 1:
                break
            continue
        while critical_eps_float(p, a) >= eps_min:
            high.append((p, a))
            a += 1
    high_sorted = _sorted_high(high, digits)
    h_eps = np.array([e for e, _, _ in high_sorted])
    h_p = np.array([p for _, p, _ in high_sorted], dtype=np.int64)
    h_inc = np.array([math.log1p(1.0 / _geometric(p, a)) for _, p, a in high_sorted])
    h_ptr = 0

    ln_lo, ln_hi = state.log_n.lo, state.log_n.hi
    ls_lo, ls_hi = state.log_sig.lo, state.log_sig.hi
    index = state.index
    e_gamma = math.exp(EULER_GAMMA)
    for chunk in prime_chunks(p_bound, start=next_new + 1):
        eps0 = np.log1p(1.0 / chunk) / np.log(chunk.astype(np.float64))
        # High transitions that belong before the end of this chunk.
        end = h_ptr + int(np.searchsorted(-h_eps[h_ptr:], -eps0[-1], side="left"))
        take_eps = h_eps[h_ptr:end]
        pos = np.searchsorted(-eps0, -take_eps, side="left")
        for k, (e, pp) in enumerate(zip(take_eps.tolist(), pos.tolist())):
            # Near-ties with the neighbouring a=0 transitions get an interval decision.
            _, p_h, a_h = high_sorted[h_ptr + k]
            for nb in (pp - 1, pp):
                if 0 <= nb < len(eps0) and abs(eps0[nb] - e) <= TIE_TOLERANCE * e:
                    first = compare_transitions((p_h, a_h), (int(chunk[nb]), 0), digits)
                    pos[k] = nb if first < 0 else nb + 1
        primes_m = np.insert(chunk, pos, h_p[h_ptr:end])
        inc_m = np.insert(np.log1p(1.0 / chunk.astype(np.float64)), pos, h_inc[h_ptr:end])
        h_ptr = end
        logp_m = np.log(primes_m.astype(np.float64))

        ln0, ls0 = float(ln_lo), float(ls_lo)
        cs_ln = _blocked_cumsum(logp_m)
        cs_ls = _blocked_cumsum(inc_m)
        m = len(logp_m)
        growth = (1024 + m // 1024 + 6) * _U
        err_ln = (growth + _LIBM_REL) * float(cs_ln[-1]) + float(up.sub(ln_hi, ln_lo)) + 2 * _U * abs(ln0)
        err_ls = (growth + _LIBM_REL) * float(cs_ls[-1]) + float(up.sub(ls_hi, ls_lo)) + 2 * _U * abs(ls0)
        logn = ln0 + cs_ln
        logs = ls0 + cs_ls
        inside = logn + err_ln < limit_lo
        stop = int(np.argmin(inside)) if not inside.all() else m
        if stop < m and logn[stop] - err_ln <= limit_hi:
            raise PrecisionError(f"limit test undecided near index {index + stop + 1}", 2 * digits)
        logn, logs = logn[:stop], logs[:stop]
        loglog = np.log(logn)
        rhs = e_gamma * loglog
        sig = np.exp(logs)
        margin = rhs - sig
        radius = (e_gamma * err_ln / logn * 1.01 + sig * err_ls * 1.01
                  + 8 * _U * (rhs + sig) + 1e-300)
        holds = margin - radius > 0
        for k in np.flatnonzero(~holds).tolist():
            row = _exact_partial(index + k + 1, ln_lo, ln_hi, ls_lo, ls_hi, logp_m[: k + 1], inc_m[: k + 1], digits)
            _record(report, row, True)
        n_hold = int(holds.sum())
        report.count += n_hold
        report.holds += n_hold
        if n_hold:
            lo_edge = np.where(holds, margin - radius, np.inf)
            k = int(np.argmin(lo_edge))
            edge_lo = np.nextafter(lo_edge[k], -np.inf)
            edge_hi = np.nextafter(margin[k] + radius[k], np.inf)
            cand = IntervalReal(mpfr(float(edge_lo), 53), mpfr(float(edge_hi), 53), digits)
            if report.min_margin is None or cand.lo < report.min_margin.lo:
                report.min_margin = cand
                report.min_margin_index = index + k + 1
                report.min_margin_loglog = float(loglog[k])
                report.min_row = CARow(index + k + 1, float(loglog[k]), float(sig[k]), float(rhs[k]),
                                       cand, Verdict.HOLDS)
        if stop:
            report.last_loglog = float(loglog[-1])
            report.largest_prime = max(report.largest_prime or 0, int(primes_m[:stop].max()))
        # Fold the consumed terms into the exact running state.
        for values, lo_name in ((logp_m[:stop], "ln"), (inc_m[:stop], "ls")):
            a, b = _exact_fsum(values)
            err = (_LIBM_REL + 2.0**-104) * abs(a) + 1e-300
            if lo_name == "ln":
                ln_lo = down.sub(down.add(down.add(ln_lo, a), b), err)
                ln_hi = up.add(up.add(up.add(ln_hi, a), b), err)
            else:
                ls_lo = down.sub(down.add(down.add(ls_lo, a), b), err)
                ls_hi = up.add(up.add(up.add(ls_hi, a), b), err)
        index += stop
        if stop < m:
            return
    raise AssertionError("prime bound exhausted before reaching the log log limit")


def _exact_partial(index, ln_lo, ln_hi, ls_lo, ls_hi, logp, inc, digits) -> CARow:
    down, up = directed(digits)
    parts = []
    for values, lo, hi in ((logp, ln_lo, ln_hi), (inc, ls_lo, ls_hi)):
        a, b = _exact_fsum(values)
        err = (_LIBM_REL + 2.0**-104) * abs(a) + 1e-300
        parts.append(IntervalReal(down.sub(down.add(down.add(lo, a), b), err),
                                  up.add(up.add(up.add(hi, a), b), err), digits))
    log_n, log_sig = parts
    loglog = log_i(log_n)
    rhs = exp_gamma(digits) * loglog
    sig = exp_i(log_sig)
    margin = rhs - sig
    verdict = Verdict.HOLDS if margin.lo > 0 else Verdict.FAILS if margin.hi < 0 else Verdict.UNDECIDED
    return CARow(index, loglog, sig, rhs, margin, verdict)


# -- gaps -------------------------------------------------------------------


@dataclass
class GapReport:
    n1: int
    n2: int
    scan: RangeReport | None
    violators_above_5040: list[int]

    def to_json(self) -> dict:
        return {"n1": self.n1, "n2": self.n2, "violators_above_5040": self.violators_above_5040,
                "scan": None if self.scan is None else self.scan.to_json()}


def gap_check(n1: CANumber | int, n2: CANumber | int, exhaustive_limit: int = 10**8, threads: int = 1) -> GapReport:
    """Check Robin's inequality on every integer in (n1, n2] with the sigma sieve."""
    v1 = n1.value if isinstance(n1, CANumber) else int(n1)
    if isinstance(n2, CANumber):
        if float(n2.log_n.lo) > math.log(exhaustive_limit) + 1:
            raise CapacityError(f"gap upper end exceeds the exhaustive limit {exhaustive_limit}")
        v2 = n2.value
    else:
        v2 = int(n2)
    if v2 > exhaustive_limit:
        raise CapacityError(f"gap upper end {v2} exceeds the exhaustive limit {exhaustive_limit}")
    if v2 < v1:
        raise InvalidArgumentError("n2 must not precede n1")
    if v2 == v1:
        return GapReport(v1, v2, None, [])
    scan = robin_scan(max(v1 + 1, 2), v2, threads=threads)
    return GapReport(v1, v2, scan, [v for v in scan.violators if v > 5040])


def ca_values_upto(limit: int, digits: int = 50) -> list[int]:
    """Values of every CA number <= limit."""
    out = []
    for ca in ca_sequence(max(1.0, math.log(math.log(limit)) + 0.01), digits):
        v = ca.value
        if v > limit:
            break
        out.append(v)
    return out
