"""Segmented prime generation and certified Mertens/Chebyshev accumulation.

The accumulator tracks two sums over the primes p <= p_beta:

* ``logsum`` = sum log(p/(p-1)), the log of the Mertens product;
* ``theta``  = sum log p, Chebyshev's theta function.

Primes below ``FAST_MIN`` are summed term by term in MPFR with directed
rounding.  Above it each sieve segment is processed in vectorised double
precision with error bounds derived from IEEE-754 round-to-nearest alone
(no libm function enters a certified sum):

* log(p/(p-1)) = u + u^2/2 + u^3/3 + ... with u = 1/p carried as a
  double-double whose low part comes from an exact integer residual;
* log p = log a + log1p((p - a)/a) with ``a`` one of 512 anchors per binary
  octave (log a evaluated in MPFR, the log1p by a truncated series);
* segment totals come from ``math.fsum`` plus its exact residual.

The per-segment totals are folded into MPFR intervals in segment order, so
results are bit-identical for any number of worker processes.
"""

from __future__ import annotations

import bisect
import logging
import math
import os
import struct
import time
import zlib
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Iterator

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .errors import CapacityError, CheckpointError, InvalidArgumentError, PrecisionError
from .highprec import (
    DEFAULT_DIGITS,
    IntervalReal,
    _contexts,
    digits_to_bits,
    directed,
    exp_gamma,
    exp_i,
    log_i,
)

log = logging.getLogger(__name__)

FAST_MIN = 1 << 16
FAST_MAX = 1 << 35
MIN_SEGMENT = 1 << 16
MIN_ACCUMULATE_DIGITS = 30
ANCHOR_BITS = 9
_U = 2.0**-53
_THIRD = 1.0 / 3.0
_BLOCK = 1024


def default_threads() -> int:
    env = os.environ.get("ROBINKIT_THREADS")
    return int(env) if env else (os.cpu_count() or 1)


@dataclass(frozen=True)
class SieveConfig:
    segment_size: int = 1 << 24
    thread_count: int = field(default_factory=default_threads)
    checkpoint_path: str | None = None
    checkpoint_every: int = 8

    def __post_init__(self):
        if self.segment_size < MIN_SEGMENT:
            raise InvalidArgumentError(f"segment_size must be >= {MIN_SEGMENT}")
        if self.thread_count < 1:
            raise InvalidArgumentError("thread_count must be >= 1")
        if self.checkpoint_every < 1:
            raise InvalidArgumentError("checkpoint_every must be >= 1")


# -- sieving ----------------------------------------------------------------


def simple_sieve(limit: int) -> np.ndarray:
    """All primes <= limit as an int64 array."""
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    odd = np.ones((limit - 1) // 2, dtype=bool)  # odd[i] <-> 2i + 3
    for i in range(0, (math.isqrt(limit) - 1) // 2):
        if odd[i]:
            p = 2 * i + 3
            odd[(p * p - 3) // 2 :: p] = False
    return np.concatenate(([2], 2 * np.flatnonzero(odd) + 3)).astype(np.int64)


@lru_cache(maxsize=8)
def _base_primes(limit: int) -> tuple[int, ...]:
    return tuple(simple_sieve(math.isqrt(limit) + 1)[1:].tolist())


def sieve_segment(lo: int, hi: int, base: tuple[int, ...]) -> np.ndarray:
    """Primes in [lo, hi); ``base`` holds every odd prime <= sqrt(hi - 1)."""
    first = lo if lo % 2 else lo + 1
    two = [2] if lo <= 2 < hi else []
    if first >= hi:
        return np.array(two, dtype=np.int64)
    mask = np.ones((hi - first + 1) // 2, dtype=bool)
    if first == 1:
        mask[0] = False
    stop = bisect.bisect_right(base, math.isqrt(hi - 1))
    for p in base[:stop]:
        start = max(p * p, -(-first // p) * p)
        if start % 2 == 0:
            start += p
        if start < hi:
            mask[(start - first) // 2 :: p] = False
    primes = first + 2 * np.flatnonzero(mask).astype(np.int64)
    if two:
        primes = np.concatenate((np.array(two, dtype=np.int64), primes))
    return primes


def _segments(start: int, limit: int, width: int) -> Iterator[tuple[int, int]]:
    lo = start
    while lo <= limit:
        hi = min(lo + width, limit + 1)
        yield lo, hi
        lo = hi


def ordered_map(fn: Callable, tasks: Iterable, threads: int) -> Iterator:
    """``map`` over a process pool, yielding results in submission order with
    a bounded number of tasks in flight."""
    if threads <= 1:
        for task in tasks:
            yield fn(*task)
        return
    with ProcessPoolExecutor(max_workers=threads) as pool:
        window: deque = deque()
        for task in tasks:
            window.append(pool.submit(fn, *task))
            if len(window) >= 2 * threads:
                yield window.popleft().result()
        while window:
            yield window.popleft().result()


def prime_chunks(limit: int, cfg: SieveConfig | None = None, start: int = 2) -> Iterator[np.ndarray]:
    """Primes in [start, limit] as consecutive int64 arrays, one per segment."""
    if limit < 2:
        raise InvalidArgumentError(f"limit must be >= 2, got {limit}")
    cfg = cfg or SieveConfig()
    base = _base_primes(limit)
    tasks = ((lo, hi, base) for lo, hi in _segments(max(start, 0), limit, 2 * cfg.segment_size))
    yield from ordered_map(sieve_segment, tasks, cfg.thread_count)


def primes_stream(limit: int, cfg: SieveConfig | None = None, start: int = 2) -> Iterator[int]:
    """Every prime in [start, limit] in increasing order.

    Restarting with ``start`` set past the last prime seen resumes the stream.
    """
    for chunk in prime_chunks(limit, cfg, start):
        yield from chunk.tolist()


def prime_count(limit: int, cfg: SieveConfig | None = None) -> int:
    return sum(len(chunk) for chunk in prime_chunks(limit, cfg))


def nth_prime(k: int, cfg: SieveConfig | None = None) -> int:
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    if k < 6:
        return (2, 3, 5, 7, 11)[k - 1]
    # Rosser's bound p_k < k (log k + log log k) for k >= 6.
    bound = int(k * (math.log(k) + math.log(math.log(k)))) + 1
    seen = 0
    for chunk in prime_chunks(bound, cfg):
        if seen + len(chunk) >= k:
            return int(chunk[k - seen - 1])
        seen += len(chunk)
    raise AssertionError("Rosser bound violated")  # pragma: no cover


# -- vectorised segment terms -----------------------------------------------


def _inverse_residual(p: np.ndarray, inv: np.ndarray) -> np.ndarray:
    """Low part of 1/p given its rounded high part ``inv``.

    With inv = m * 2^-e (m a 53-bit integer) the residual 1 - inv*p equals
    N * 2^-e with N = 2^e - m*p, an integer computed exactly in int64 by
    splitting m into 26- and 27-bit halves.  Requires 2^16 <= p < 2^35.
    """
    mant, ex = np.frexp(inv)
    m = (mant * 2.0**53).astype(np.int64)
    e = (53 - ex).astype(np.int64)
    m1, m0 = m >> 27, m & ((1 << 27) - 1)
    a = np.left_shift(np.int64(1), e - 27) - m1 * p
    n = a * (1 << 27) - m0 * p
    return np.ldexp(n.astype(np.float64) / p.astype(np.float64), -e)


def _exact_fsum(values: np.ndarray) -> tuple[float, float]:
    """(a, b) with a + b equal to the exact sum up to 2^-105 |a|."""
    items = values.tolist()
    a = math.fsum(items)
    items.append(-a)
    return a, math.fsum(items)


_LOG1P_COEFFS = tuple((-1.0) ** (k + 1) / k for k in range(1, 8))


def _log1p_series(x: np.ndarray) -> np.ndarray:
    acc = np.full_like(x, _LOG1P_COEFFS[-1])
    for c in reversed(_LOG1P_COEFFS[:-1]):
        acc = c + x * acc
    return x * acc


@dataclass
class SegmentTerms:
    """Per-prime double-precision terms of one segment."""

    primes: np.ndarray
    inv_hi: np.ndarray  # rounded 1/p
    inv_corr: np.ndarray  # log(p/(p-1)) - inv_hi, to ~2^-46 inv_hi^2
    anchors: np.ndarray  # octave anchor a with p in [a, a(1 + 2^-9))
    series: np.ndarray  # log1p((p - a)/a)


def segment_terms(lo: int, hi: int, base: tuple[int, ...], take: int | None = None) -> SegmentTerms:
    p = sieve_segment(lo, hi, base)
    if take is not None:
        p = p[:take]
    if len(p) and (p[0] < FAST_MIN or p[-1] >= FAST_MAX):
        raise InvalidArgumentError("fast path covers primes in [2^16, 2^35) only")
    pf = p.astype(np.float64)
    inv = 1.0 / pf
    low = _inverse_residual(p, inv)
    corr = low + inv * inv * (0.5 + inv * (_THIRD + inv * 0.25))
    exponent = np.frexp(pf)[1].astype(np.int64) - 1
    shift = exponent - ANCHOR_BITS
    anchors = (p >> shift) << shift
    x = (p - anchors).astype(np.float64) / anchors.astype(np.float64)
    return SegmentTerms(p, inv, corr, anchors, _log1p_series(x))


@dataclass
class SegmentSummary:
    """Exact-ish totals of one segment plus rigorous error radii."""

    lo: int
    hi: int
    count: int
    last_prime: int
    s_parts: tuple[float, float, float, float]
    s_err: float
    anchor_values: np.ndarray
    anchor_counts: np.ndarray
    y_parts: tuple[float, float]
    y_err: float
    s_prefix: np.ndarray | None = None
    t_prefix: np.ndarray | None = None
    prefix_err_s: float = 0.0
    prefix_err_t: float = 0.0


def _blocked_cumsum(values: np.ndarray) -> np.ndarray:
    n = len(values)
    nb = -(-n // _BLOCK)
    padded = np.zeros(nb * _BLOCK)
    padded[:n] = values
    blocks = padded.reshape(nb, _BLOCK)
    inner = np.cumsum(blocks, axis=1)
    offsets = np.concatenate(([0.0], np.cumsum(inner[:, -1])[:-1]))
    return (inner + offsets[:, None]).ravel()[:n]


def summarize_terms(lo: int, hi: int, terms: SegmentTerms, want_prefix: bool = False) -> SegmentSummary:
    p = terms.primes
    n = len(p)
    if n == 0:
        empty = np.zeros(0)
        return SegmentSummary(lo, hi, 0, 0, (0.0, 0.0, 0.0, 0.0), 0.0, np.zeros(0, np.int64),
                              np.zeros(0, np.int64), (0.0, 0.0), 0.0,
                              empty if want_prefix else None, empty if want_prefix else None)
    a1, b1 = _exact_fsum(terms.inv_hi)
    a2, b2 = _exact_fsum(terms.inv_corr)
    inv_max = float(terms.inv_hi[0])
    # Per-term truncation/rounding (2^-46 u^2 each) plus the fsum residual bounds.
    s_err = (2.0**-46 * inv_max * abs(a1) + 2.0**-104 * (abs(a1) + abs(a2)) + 1e-300) * 1.001
    ay, by = _exact_fsum(terms.series)
    # Series truncation (x^8/8 << 2^-72 x) and Horner/division rounding (<= 24u x).
    y_err = (2.0**-48 * abs(ay) + 2.0**-104 * abs(ay) + 1e-300) * 1.001
    values, counts = np.unique(terms.anchors, return_counts=True)
    summary = SegmentSummary(lo, hi, n, int(p[-1]), (a1, b1, a2, b2), s_err, values, counts, (ay, by), y_err)
    if want_prefix:
        s_terms = terms.inv_hi + terms.inv_corr
        summary.s_prefix = _blocked_cumsum(s_terms)
        log_anchor = np.log(terms.anchors.astype(np.float64))
        t_terms = log_anchor + terms.series
        summary.t_prefix = _blocked_cumsum(t_terms)
        nb = -(-n // _BLOCK)
        growth = (_BLOCK + nb + 4) * _U * 1.01
        summary.prefix_err_s = growth * float(np.sum(s_terms)) + 4 * _U * float(np.sum(s_terms))
        # log of the anchor comes from libm here; 2 ulp each is allowed.
        summary.prefix_err_t = growth * float(np.sum(t_terms)) + 4 * _U * float(np.sum(t_terms))
    return summary


def fast_segment(lo: int, hi: int, base: tuple[int, ...], take: int | None = None,
                 want_prefix: bool = False) -> SegmentSummary:
    return summarize_terms(lo, hi, segment_terms(lo, hi, base, take), want_prefix)


# -- the accumulator --------------------------------------------------------


@lru_cache(maxsize=1 << 16)
def _log_anchor(a: int, bits: int) -> tuple[mpfr, mpfr]:
    down, up, _ = _contexts(bits)
    return down.log(a), up.log(a)


@dataclass
class MertensAccumulator:
    """Running certified sums over the first ``count`` primes."""

    digits: int = DEFAULT_DIGITS
    count: int = 0
    last_prime: int = 1
    s_lo: mpfr = field(default_factory=lambda: mpfr(0))
    s_hi: mpfr = field(default_factory=lambda: mpfr(0))
    t_lo: mpfr = field(default_factory=lambda: mpfr(0))
    t_hi: mpfr = field(default_factory=lambda: mpfr(0))

    @property
    def beta(self) -> int:
        return self.count

    @property
    def logsum(self) -> IntervalReal:
        return IntervalReal(self.s_lo, self.s_hi, self.digits)

    @property
    def theta(self) -> IntervalReal:
        return IntervalReal(self.t_lo, self.t_hi, self.digits)

    @property
    def logsum_error(self) -> float:
        return float(self.logsum.width) / 2

    @property
    def theta_error(self) -> float:
        return float(self.theta.width) / 2

    @property
    def error_bound(self) -> float:
        return max(self.logsum_error, self.theta_error)

    def copy(self) -> "MertensAccumulator":
        return MertensAccumulator(self.digits, self.count, self.last_prime,
                                  self.s_lo, self.s_hi, self.t_lo, self.t_hi)

    def add_prime(self, p: int) -> None:
        """Fold one prime in at full working precision."""
        down, up = directed(self.digits)
        # Bracket p/(p-1) first.  No Python operators on mpfr here: they
        # round in the global context, not at working precision.
        term_lo = down.log(down.div(p, p - 1))
        term_hi = up.log(up.div(p, p - 1))
        self.s_lo = down.add(self.s_lo, term_lo)
        self.s_hi = up.add(self.s_hi, term_hi)
        self.t_lo = down.add(self.t_lo, down.log(p))
        self.t_hi = up.add(self.t_hi, up.log(p))
        self.count += 1
        self.last_prime = p

    def add_segment(self, seg: SegmentSummary) -> None:
        if seg.count == 0:
            return
        down, up = directed(self.digits)
        s_lo, s_hi = self.s_lo, self.s_hi
        for part in seg.s_parts:
            s_lo = down.add(s_lo, part)
            s_hi = up.add(s_hi, part)
        self.s_lo = down.sub(s_lo, seg.s_err)
        self.s_hi = up.add(s_hi, seg.s_err)
        self.t_lo, self.t_hi = _theta_fold(self.t_lo, self.t_hi, seg.anchor_values, seg.anchor_counts,
                                           seg.y_parts, seg.y_err, self.digits)
        self.count += seg.count
        self.last_prime = seg.last_prime


def _theta_fold(t_lo, t_hi, anchors, counts, y_parts, y_err, digits):
    down, up = directed(digits)
    bits = digits_to_bits(digits)
    for a, c in zip(anchors.tolist(), counts.tolist()):
        la, ha = _log_anchor(a, bits)
        t_lo = down.add(t_lo, down.mul(la, c))
        t_hi = up.add(t_hi, up.mul(ha, c))
    for part in y_parts:
        t_lo = down.add(t_lo, part)
        t_hi = up.add(t_hi, part)
    return down.sub(t_lo, y_err), up.add(t_hi, y_err)


# -- checkpoints ------------------------------------------------------------

CHECKPOINT_MAGIC = b"RBL1"
CHECKPOINT_VERSION = 1
_CHECKPOINT_FIELDS = ("kind", "eps_num", "eps_den", "target", "segment_size", "digits",
                      "beta", "p_beta", "next_lo", "logsum_lo", "logsum_hi", "theta_lo", "theta_hi",
                      "logsum_err", "theta_err")


def _fmt(x: mpfr) -> str:
    # Exact mantissa/exponent pair, so a restored run is bit-identical.
    m, e = x.as_mantissa_exp()
    return f"{m}p{e}"


def _parse(text: str, digits: int, upward: bool) -> mpfr:
    m, _, e = text.partition("p")
    m, e = int(m), int(e)
    exact = gmpy2.mpq(m * 2**e) if e >= 0 else gmpy2.mpq(m, 2**-e)
    down, up = directed(digits)
    return mpfr(exact, 0, context=up if upward else down)


def write_checkpoint(path: str | Path, record: dict) -> None:
    """Write a versioned binary checkpoint atomically (temp file + rename)."""
    body = struct.pack("<4sH", CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    for name in _CHECKPOINT_FIELDS:
        data = str(record[name]).encode()
        body += struct.pack("<I", len(data)) + data
    body += struct.pack("<I", zlib.crc32(body))
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(body)
        os.replace(tmp, path)
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint {path}: {exc}") from exc


def read_checkpoint(path: str | Path) -> dict:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < 10 or raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not a robinkit checkpoint")
    (crc,) = struct.unpack("<I", raw[-4:])
    if zlib.crc32(raw[:-4]) != crc:
        raise CheckpointError(f"{path} is corrupt (crc mismatch)")
    (version,) = struct.unpack("<H", raw[4:6])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    offset, record = 6, {}
    for name in _CHECKPOINT_FIELDS:
        (size,) = struct.unpack("<I", raw[offset : offset + 4])
        record[name] = raw[offset + 4 : offset + 4 + size].decode()
        offset += 4 + size
    return record


def _checkpoint_record(kind, eps, target, cfg, acc: MertensAccumulator, next_lo):
    d = acc.digits
    return {
        "kind": kind,
        "eps_num": eps.numerator if eps is not None else 0,
        "eps_den": eps.denominator if eps is not None else 0,
        "target": target,
        "segment_size": cfg.segment_size,
        "digits": d,
        "beta": acc.count,
        "p_beta": acc.last_prime,
        "next_lo": next_lo,
        "logsum_lo": _fmt(acc.s_lo),
        "logsum_hi": _fmt(acc.s_hi),
        "theta_lo": _fmt(acc.t_lo),
        "theta_hi": _fmt(acc.t_hi),
        "logsum_err": repr(acc.logsum_error),
        "theta_err": repr(acc.theta_error),
    }


def _restore(record: dict, kind, eps, target, cfg, digits) -> tuple[MertensAccumulator, int] | None:
    expected = {
        "kind": kind,
        "eps_num": str(eps.numerator if eps is not None else 0),
        "eps_den": str(eps.denominator if eps is not None else 0),
        "target": str(target),
        "segment_size": str(cfg.segment_size),
        "digits": str(digits),
    }
    mismatch = {k: (record[k], v) for k, v in expected.items() if record[k] != v}
    if mismatch:
        raise CheckpointError(f"checkpoint does not match this run: {mismatch}")
    acc = MertensAccumulator(
        digits, int(record["beta"]), int(record["p_beta"]),
        _parse(record["logsum_lo"], digits, False), _parse(record["logsum_hi"], digits, True),
        _parse(record["theta_lo"], digits, False), _parse(record["theta_hi"], digits, True),
    )
    return acc, int(record["next_lo"])


class _Checkpointer:
    """Periodic checkpoint writer; I/O failures are logged, never fatal."""

    def __init__(self, cfg: SieveConfig, kind, eps, target):
        self.cfg, self.kind, self.eps, self.target = cfg, kind, eps, target
        self.pending = 0
        self.failures = 0

    def load(self, digits):
        path = self.cfg.checkpoint_path
        if not path or not Path(path).exists():
            return None
        return _restore(read_checkpoint(path), self.kind, self.eps, self.target, self.cfg, digits)

    def tick(self, acc, next_lo, force=False):
        if not self.cfg.checkpoint_path:
            return
        self.pending += 1
        if not force and self.pending < self.cfg.checkpoint_every:
            return
        self.pending = 0
        try:
            write_checkpoint(self.cfg.checkpoint_path,
                             _checkpoint_record(self.kind, self.eps, self.target, self.cfg, acc, next_lo))
        except CheckpointError as exc:
            self.failures += 1
            log.warning("%s", exc)


# -- accumulate -------------------------------------------------------------


def _require_digits(digits: int) -> None:
    if digits < MIN_ACCUMULATE_DIGITS:
        raise PrecisionError(
            f"accumulation needs at least {MIN_ACCUMULATE_DIGITS} digits, got {digits}",
            required_digits=MIN_ACCUMULATE_DIGITS,
        )


def _small_phase_primes() -> list[int]:
    return simple_sieve(FAST_MIN - 1).tolist()


def accumulate(
    limit: int | None = None,
    count: int | None = None,
    cfg: SieveConfig | None = None,
    digits: int = DEFAULT_DIGITS,
) -> MertensAccumulator:
    """Certified logsum and theta over the primes <= ``limit`` or over the
    first ``count`` primes (exactly one of the two)."""
    if (limit is None) == (count is None):
        raise InvalidArgumentError("give exactly one of limit or count")
    _require_digits(digits)
    cfg = cfg or SieveConfig()
    if limit is not None and limit < 2:
        raise InvalidArgumentError("limit must be >= 2")
    if count is not None and count < 1:
        raise InvalidArgumentError("count must be >= 1")
    acc = MertensAccumulator(digits)
    for p in _small_phase_primes():
        if (limit is not None and p > limit) or (count is not None and acc.count >= count):
            return acc
        acc.add_prime(p)
    target = limit if limit is not None else count
    kind = "limit" if limit is not None else "count"
    ckpt = _Checkpointer(cfg, f"accumulate-{kind}", None, target)
    restored = ckpt.load(digits)
    start = FAST_MIN
    if restored:
        acc, start = restored
    stop = limit if limit is not None else FAST_MAX - 1
    base = _base_primes(FAST_MAX - 1)
    width = 2 * cfg.segment_size
    tasks = ((lo, hi, base) for lo, hi in _segments(start, stop, width))
    for seg in ordered_map(fast_segment, tasks, cfg.thread_count):
        if count is not None and acc.count + seg.count >= count:
            need = count - acc.count
            acc.add_segment(fast_segment(seg.lo, seg.hi, base, take=need))
            return acc
        acc.add_segment(seg)
        ckpt.tick(acc, seg.hi)
    if count is not None and acc.count < count:
        raise CapacityError(f"the fast path stops at 2^35; only {acc.count} primes available")
    return acc


# -- beta_max ---------------------------------------------------------------


def log_c_interval(eps: Fraction, digits: int) -> IntervalReal:
    """log((1 + eps) e^gamma)."""
    return log_i((1 + IntervalReal.exact(eps, digits)) * exp_gamma(digits))


def crossing_margin(acc: MertensAccumulator, log_c: IntervalReal) -> IntervalReal:
    """H = log log theta - logsum + log((1+eps) e^gamma).

    H < 0  <=>  prod_{p <= p_beta} p < n_beta (the search continues);
    the first beta >= 2 with H >= 0 is beta_max.
    """
    return log_i(log_i(acc.theta)) - acc.logsum + log_c


def loglog_n_beta(logsum: IntervalReal, eps: Fraction) -> IntervalReal:
    """log log n_beta = exp(logsum) / ((1 + eps) e^gamma)."""
    d = logsum.digits
    return exp_i(logsum) / ((1 + IntervalReal.exact(eps, d)) * exp_gamma(d))


@dataclass
class BetaMaxResult:
    eps: Fraction
    beta_max: int
    p_beta_max: int
    loglog_n_beta_max: IntervalReal
    margin_at: IntervalReal  # H at beta_max (>= 0)
    margin_before: IntervalReal | None  # H at beta_max - 1 (< 0)
    accumulator: MertensAccumulator
    overshoot_checked: int = 0
    reversals: list[int] = field(default_factory=list)
    escalations: int = 0
    checkpoint_failures: int = 0
    elapsed: float = 0.0

    def __iter__(self):
        return iter((self.beta_max, self.loglog_n_beta_max))


def _validate_eps(eps) -> Fraction:
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise InvalidArgumentError(f"epsilon must satisfy 0 < eps < 1, got {eps}")
    return eps


class _Scan:
    """State machine of the beta_max search over the fast segments."""

    def __init__(self, eps, digits, overshoot):
        self.eps, self.digits, self.overshoot = eps, digits, overshoot
        self.log_c = log_c_interval(eps, digits)
        self.found: tuple | None = None
        self.previous_margin: IntervalReal | None = None
        self.checked_after = 0
        self.reversals: list[int] = []
        self.escalations = 0

    @property
    def done(self) -> bool:
        return self.found is not None and self.checked_after >= self.overshoot

    def observe(self, beta: int, prime: int, margin: IntervalReal, acc_factory) -> None:
        if margin.hi < 0:
            sign = -1
        elif margin.lo > 0:
            sign = 1
        else:
            raise PrecisionError(f"crossing test undecided at beta={beta}; margin {margin!r}",
                                 required_digits=2 * self.digits)
        if self.found is None:
            if sign > 0:
                self.found = (beta, prime, margin, self.previous_margin, acc_factory())
            else:
                self.previous_margin = margin
        else:
            self.checked_after += 1
            if sign < 0:
                self.reversals.append(beta)


def _scan_segment(scan: _Scan, acc: MertensAccumulator, seg: SegmentSummary, base) -> None:
    """Locate sign changes of H inside one fast segment.

    Approximate H from the double prefixes, then recompute every index whose
    sign is not certified by the approximation's error radius exactly.
    """
    if seg.count == 0:
        return
    d = acc.digits
    k0 = crossing_margin(acc, scan.log_c)
    t0 = float(acc.theta.mid)
    log_t0 = math.log(t0)
    k0_mid = float(k0.mid)
    inner = np.log1p(np.log1p(seg.t_prefix / t0) / log_t0)
    h = k0_mid + inner - seg.s_prefix
    t_max = float(seg.t_prefix[-1])
    radius = (
        float(k0.width) / 2 + abs(k0_mid) * _U
        + seg.prefix_err_s
        + seg.prefix_err_t / (t0 * log_t0) * 1.01
        + (float(acc.theta.width) + 2 * t0 * _U) * t_max / (t0 * t0 * log_t0) * 2
        + 2.0**-48 * (abs(k0_mid) + float(np.max(np.abs(inner))) + float(seg.s_prefix[-1]))
    )
    if scan.found is None:
        pending = np.flatnonzero(h > -radius)
        if len(pending) == 0:
            scan.previous_margin = None
            return
    else:
        pending = np.flatnonzero(h < radius)
        scan.checked_after += seg.count - len(pending)
        if len(pending) == 0:
            return
    terms = segment_terms(seg.lo, seg.hi, base)
    last_exact = None
    for idx in pending.tolist():
        if scan.found is None and last_exact != idx - 1:
            # The index just before was certified negative by the approximation;
            # recompute it so the report carries H at beta_max - 1.
            scan.previous_margin = (_exact_margin(acc, terms, idx - 1, scan) if idx
                                    else crossing_margin(acc, scan.log_c))
        last_exact = idx
        if scan.found is not None and scan.checked_after >= scan.overshoot:
            break
        margin = _exact_margin(acc, terms, idx, scan)
        scan.escalations += 1
        beta = acc.count + idx + 1
        scan.observe(beta, int(terms.primes[idx]), margin, lambda: _prefix_accumulator(acc, terms, idx))
        if scan.found is not None and scan.found[0] == beta:
            # Indices after the crossing are re-examined by the overshoot pass.
            after = np.flatnonzero(h[idx + 1 :] < radius) + idx + 1
            scan.checked_after += int(np.sum(h[idx + 1 :] >= radius))
            for j in after.tolist():
                if scan.checked_after >= scan.overshoot:
                    break
                m = _exact_margin(acc, terms, j, scan)
                scan.escalations += 1
                scan.observe(acc.count + j + 1, int(terms.primes[j]), m, None)
            return


def _prefix_accumulator(acc: MertensAccumulator, terms: SegmentTerms, idx: int) -> MertensAccumulator:
    sub = SegmentTerms(terms.primes[: idx + 1], terms.inv_hi[: idx + 1], terms.inv_corr[: idx + 1],
                       terms.anchors[: idx + 1], terms.series[: idx + 1])
    out = acc.copy()
    out.add_segment(summarize_terms(0, 0, sub))
    return out


def _exact_margin(acc, terms, idx, scan) -> IntervalReal:
    return crossing_margin(_prefix_accumulator(acc, terms, idx), scan.log_c)


def find_beta_max(
    eps,
    cfg: SieveConfig | None = None,
    digits: int = DEFAULT_DIGITS,
    overshoot: int = 100_000,
    progress: Callable[[MertensAccumulator], None] | None = None,
) -> BetaMaxResult:
    """Smallest beta >= 2 with prod_{p <= p_beta} p >= n_beta.

    Scans the primes in order with certified sign decisions of the crossing
    margin H (see :func:`crossing_margin`).  After the crossing, ``overshoot``
    further values of beta are checked and any return to H < 0 is recorded in
    ``reversals``.
    """
    eps = _validate_eps(eps)
    _require_digits(digits)
    cfg = cfg or SieveConfig()
    started = time.perf_counter()
    scan = _Scan(eps, digits, overshoot)
    acc = MertensAccumulator(digits)
    for p in _small_phase_primes():
        acc.add_prime(p)
        if acc.count >= 2:
            scan.observe(acc.count, p, crossing_margin(acc, scan.log_c), acc.copy)
        if scan.done:
            break
    ckpt = _Checkpointer(cfg, "beta-max", eps, 0)
    if not scan.done:
        start = FAST_MIN
        if scan.found is None:
            restored = ckpt.load(digits)
            if restored:
                acc, start = restored
                log.info("resumed at beta=%d p=%d", acc.count, acc.last_prime)
        base = _base_primes(FAST_MAX - 1)
        tasks = ((lo, hi, base, None, True) for lo, hi in _segments(start, FAST_MAX - 1, 2 * cfg.segment_size))
        for seg in ordered_map(fast_segment, tasks, cfg.thread_count):
            _scan_segment(scan, acc, seg, base)
            acc.add_segment(seg)
            if scan.found is None:
                ckpt.tick(acc, seg.hi)
                if progress:
                    progress(acc)
            if scan.done:
                break
        else:
            if scan.found is None:
                raise CapacityError("no crossing below 2^35")
    beta, prime, margin, before, at_acc = scan.found
    return BetaMaxResult(
        eps=eps,
        beta_max=beta,
        p_beta_max=prime,
        loglog_n_beta_max=loglog_n_beta(at_acc.logsum, eps),
        margin_at=margin,
        margin_before=before,
        accumulator=at_acc,
        overshoot_checked=scan.checked_after,
        reversals=scan.reversals,
        escalations=scan.escalations,
        checkpoint_failures=ckpt.failures,
        elapsed=time.perf_counter() - started,
    )
