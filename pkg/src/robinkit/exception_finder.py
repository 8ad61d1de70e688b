"""Exceptions to f(n) < e^gamma (1 + eps) log log n.

f(n) = prod_{p <= p_omega(n)} p/(p-1) depends on n only through omega(n) = alpha,
so for a fixed alpha the inequality fails exactly when n <= n_alpha with

    log log n_alpha = f_alpha / ((1 + eps) e^gamma).

The table of n_alpha runs up to beta_max (the first beta whose primorial
reaches n_beta); beyond it there are no exceptions.  Each alpha is then
enumerated depth first over strictly increasing primes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator

import gmpy2

from .arith import Factorization
from .errors import CapacityError, InvalidArgumentError, PrecisionError
from .highprec import (
    DEFAULT_DIGITS,
    CertifiedOrder,
    IntervalReal,
    compare,
    exp_gamma,
    exp_i,
    floor_int,
    log_i,
    log_int,
)
from .primes import (
    MertensAccumulator,
    SieveConfig,
    _validate_eps,
    crossing_margin,
    log_c_interval,
    loglog_n_beta,
    ordered_map,
    prime_chunks,
    simple_sieve,
)

DEFAULT_MAX_ROWS = 2_000_000
DEFAULT_MAX_N = 10**8
DEFAULT_MAX_CANDIDATES = 10**7


@dataclass(frozen=True)
class BetaRow:
    alpha: int
    logsum: IntervalReal  # log f_alpha
    loglog_n: IntervalReal  # log log n_alpha

    @property
    def log_n(self) -> IntervalReal:
        return exp_i(self.loglog_n)


@dataclass
class BetaTable:
    eps: Fraction
    rows: list[BetaRow]
    beta_max: int
    digits: int = DEFAULT_DIGITS

    def row(self, alpha: int) -> BetaRow:
        return self.rows[alpha - 1]

    def digest(self) -> str:
        h = hashlib.sha256(f"{self.eps}|{self.beta_max}|{self.digits}".encode())
        for r in self.rows:
            h.update(f"|{r.alpha}:{r.loglog_n.lo.digits(16)}:{r.loglog_n.hi.digits(16)}".encode())
        return h.hexdigest()


def _all_primes(cfg: SieveConfig) -> Iterator[int]:
    lo, width = 2, 1 << 22
    while True:
        for chunk in prime_chunks(lo + width - 1, SieveConfig(cfg.segment_size, 1), start=lo):
            yield from chunk.tolist()
        lo += width


def build_beta_table(
    eps,
    digits: int = DEFAULT_DIGITS,
    cfg: SieveConfig | None = None,
    max_rows: int = DEFAULT_MAX_ROWS,
    max_log_n: float | None = None,
) -> BetaTable:
    """n_alpha for 1 <= alpha <= beta_max, with beta_max found on the way.

    ``max_log_n`` refuses (CapacityError naming alpha) as soon as some
    log n_alpha provably exceeds it; ``max_rows`` bounds beta_max.
    """
    eps = _validate_eps(eps)
    cfg = cfg or SieveConfig(thread_count=1)
    log_c = log_c_interval(eps, digits)
    acc = MertensAccumulator(digits)
    rows: list[BetaRow] = []
    for p in _all_primes(cfg):
        acc.add_prime(p)
        row = BetaRow(acc.count, acc.logsum, loglog_n_beta(acc.logsum, eps))
        if max_log_n is not None and row.log_n.lo > max_log_n:
            raise CapacityError(
                f"log n_alpha exceeds the cap {max_log_n:g} at alpha={acc.count}", token=str(acc.count)
            )
        rows.append(row)
        if acc.count >= 2:
            h = crossing_margin(acc, log_c)
            if h.lo > 0:
                return BetaTable(eps, rows, acc.count, digits)
            if not h.hi < 0:
                raise PrecisionError(f"crossing undecided at beta={acc.count}", required_digits=2 * digits)
        if acc.count >= max_rows:
            raise CapacityError(f"beta_max exceeds the row cap {max_rows}", token=str(acc.count))
    raise AssertionError("unreachable")  # pragma: no cover


def _row_at(eps: Fraction, alpha: int, digits: int) -> BetaRow:
    # Exact recomputation of one row at a different precision.
    acc = MertensAccumulator(digits)
    for p in simple_sieve(max(16, int(alpha * (math.log(alpha + 2) + math.log(math.log(alpha + 2)) + 3)))).tolist()[:alpha]:
        acc.add_prime(p)
    return BetaRow(alpha, acc.logsum, loglog_n_beta(acc.logsum, eps))


def integer_cutoff(table: BetaTable, alpha: int, max_digits: int | None = None) -> int:
    """floor(n_alpha), certified: refines precision until the enclosure of
    n_alpha has a single integer floor."""
    digits = table.digits
    ceiling = max_digits or 8 * digits
    row = table.row(alpha)
    while True:
        log_n = row.log_n
        if log_n.hi < 0:
            return 0
        n_iv = exp_i(log_n)
        lo, hi = floor_int(n_iv.lo), floor_int(n_iv.hi)
        if lo == hi:
            return lo
        if digits >= ceiling:
            raise PrecisionError(f"n_alpha straddles an integer at alpha={alpha}", required_digits=2 * digits)
        digits = min(2 * digits, ceiling)
        row = _row_at(table.eps, alpha, digits)


@dataclass(frozen=True)
class ExceptionRecord:
    n: int
    factorization: Factorization
    omega: int
    f_log: IntervalReal
    rhs_log: IntervalReal | None  # None when e^gamma (1+eps) log log n <= 0 (n = 2)


def _verify(n: int, fac: Factorization, row: BetaRow, eps: Fraction, digits: int) -> ExceptionRecord:
    """Certify f(n) >= e^gamma (1+eps) log log n; anything else is a bug upstream."""
    loglog = log_i(log_int(n, digits))
    if loglog.hi < 0:
        return ExceptionRecord(n, fac, fac.omega, row.logsum, None)
    rhs_log = log_i(loglog) + log_c_interval(eps, digits)
    order = compare(row.logsum, rhs_log)
    if order is CertifiedOrder.UNDECIDED:
        raise PrecisionError(f"exception test undecided for n={n}", required_digits=2 * digits)
    if order is CertifiedOrder.LESS:
        raise AssertionError(f"n={n} satisfies the inequality but was enumerated")
    return ExceptionRecord(n, fac, fac.omega, row.logsum, rhs_log)


@lru_cache(maxsize=4)
def _primes_upto(limit: int) -> tuple[int, ...]:
    return tuple(simple_sieve(limit).tolist())


def _branches(alpha: int, first_lo: int, first_hi: int, limit: int, prime_limit: int) -> list[tuple[int, tuple]]:
    out = []
    for first in range(first_lo, first_hi):
        out.extend(_branch(alpha, first, limit, prime_limit))
    return out


def _branch(alpha: int, first: int, limit: int, prime_limit: int) -> list[tuple[int, tuple]]:
    """Every n <= limit with omega(n) = alpha and smallest prime ``primes[first]``."""
    primes = _primes_upto(prime_limit)
    out: list[tuple[int, tuple]] = []

    def min_tail(idx: int, count: int) -> int:
        prod = 1
        for p in primes[idx : idx + count]:
            prod *= p
        return prod if idx + count <= len(primes) else limit + 1

    def dfs(idx: int, remaining: int, value: int, factors: tuple) -> None:
        if remaining == 0:
            out.append((value, factors))
            return
        for j in range(idx, len(primes)):
            p = primes[j]
            if value * p * min_tail(j + 1, remaining - 1) > limit:
                break
            pk, a = p, 1
            while value * pk * min_tail(j + 1, remaining - 1) <= limit:
                dfs(j + 1, remaining - 1, value * pk, factors + ((p, a),))
                pk *= p
                a += 1

    p = primes[first]
    pk, a = p, 1
    while pk * min_tail(first + 1, alpha - 1) <= limit:
        dfs(first + 1, alpha - 1, pk, ((p, a),))
        pk *= p
        a += 1
    return out


@dataclass
class EnumerationStats:
    per_alpha: dict[int, int] = field(default_factory=dict)
    cutoffs: dict[int, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.per_alpha.values())


def enumerate_exceptions(
    table: BetaTable,
    cfg: SieveConfig | None = None,
    max_n: int = DEFAULT_MAX_N,
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
    resume_token: str | None = None,
    stats: EnumerationStats | None = None,
) -> Iterator[ExceptionRecord]:
    """Yield every exception, sorted by n within each alpha, alpha ascending.

    Raises CapacityError when some n_alpha exceeds ``max_n`` (before any
    output) or when more than ``max_candidates`` records would be emitted
    (after flushing those already yielded; the token resumes at the next
    alpha).
    """
    cfg = cfg or SieveConfig(thread_count=1)
    stats = stats if stats is not None else EnumerationStats()
    cutoffs = {}
    for row in table.rows:
        if row.log_n.lo > math.log(max_n) + 1:
            raise CapacityError(f"n_alpha exceeds the cap {max_n} at alpha={row.alpha}", token=str(row.alpha))
        cut = integer_cutoff(table, row.alpha)
        if cut > max_n:
            raise CapacityError(f"n_alpha exceeds the cap {max_n} at alpha={row.alpha}", token=str(row.alpha))
        cutoffs[row.alpha] = cut
    stats.cutoffs = cutoffs
    start_alpha = int(resume_token) if resume_token else 1
    prime_limit = max(cutoffs.values(), default=2)
    primes = _primes_upto(max(prime_limit, 2))
    emitted = 0
    for alpha in range(start_alpha, table.beta_max + 1):
        limit = cutoffs[alpha]
        smallest = math.prod(primes[:alpha]) if alpha <= len(primes) else limit + 1
        found: list[tuple[int, tuple]] = []
        if smallest <= limit:
            # Branch on the smallest prime; its count is bounded by limit^(1/alpha).
            tail = math.prod(primes[1:alpha]) if alpha > 1 else 1
            n_first = max(1, sum(1 for p in primes if p * tail <= limit))
            step = max(1, -(-n_first // 64))
            tasks = ((alpha, i, min(i + step, n_first), limit, prime_limit) for i in range(0, n_first, step))
            for part in ordered_map(_branches, tasks, cfg.thread_count):
                found.extend(part)
        found.sort()
        stats.per_alpha[alpha] = len(found)
        if emitted + len(found) > max_candidates:
            raise CapacityError(
                f"more than {max_candidates} exceptions; output flushed through alpha={alpha - 1}",
                token=str(alpha),
            )
        row = table.row(alpha)
        for n, factors in found:
            fac = Factorization(factors, check=False)
            yield _verify(n, fac, row, table.eps, table.digits)
        emitted += len(found)


# -- output -----------------------------------------------------------------

CSV_HEADER = ("n", "omega", "factorization", "f_log", "rhs_log")


def record_row(rec: ExceptionRecord) -> list[str]:
    return [
        str(rec.n),
        str(rec.omega),
        str(rec.factorization),
        rec.f_log.format(20),
        rec.rhs_log.format(20) if rec.rhs_log is not None else "-inf",
    ]


def write_exceptions(records: Iterable[ExceptionRecord], path: str | Path, table: BetaTable,
                     provenance: dict | None = None) -> dict:
    """Write the CSV and its JSON sidecar (``<path>.json``); return the sidecar."""
    path = Path(path)
    counts: dict[int, int] = {}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())
        for rec in records:
            buf = io.StringIO()
            csv.writer(buf, lineterminator="\n").writerow(record_row(rec))
            fh.write(buf.getvalue())
            counts[rec.omega] = counts.get(rec.omega, 0) + 1
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    sidecar = {
        "epsilon": str(table.eps),
        "beta_max": table.beta_max,
        "table_digest": table.digest(),
        "counts": {str(k): v for k, v in sorted(counts.items())},
        "total": sum(counts.values()),
        "csv_sha256": digest,
        **(provenance or {}),
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return sidecar
