"""Sieve-based divisor sums over integer ranges and exhaustive bound scans.

sigma(n) for a block of consecutive integers is built prime by prime: for
every p <= sqrt(hi) the multiples of p, p^2, ... are visited with strided
slices, and whatever cofactor remains afterwards is a single large prime.

Scans compare sigma(n)/n with a right-hand side of the form
K * e^gamma * log log(m * n) in double precision.  The fast path works on
the log-domain difference and escalates to certified intervals whenever it
is within a guard band of zero; the reported minimum margin is always
recomputed with intervals.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from .errors import CapacityError, InvalidArgumentError
from .highprec import (
    DEFAULT_DIGITS,
    CertifiedOrder,
    IntervalReal,
    decide,
    exp_gamma,
    log_i,
    log_int,
    sci,
)
from .primes import ordered_map, simple_sieve

DEFAULT_CAP = 10**9
DEFAULT_BLOCK = 1 << 20
GUARD_BAND = 1e-8  # log-domain distance that triggers escalation
FAST_PATH_RADIUS = 1e-9
EXACT_BELOW = 100  # n this small always goes through intervals
EULER_GAMMA = 0.57721566490153286061


def _check_range(lo: int, hi: int, cap: int) -> None:
    if not 2 <= lo <= hi:
        raise InvalidArgumentError(f"need 2 <= lo <= hi, got [{lo}, {hi}]")
    if hi > cap:
        raise CapacityError(f"hi={hi} exceeds the scan cap {cap}")


def sigma_block(lo: int, hi: int, base: np.ndarray | None = None) -> np.ndarray:
    """sigma(n) for lo <= n < hi as int64 (exact for n up to ~10^15)."""
    if base is None:
        base = simple_sieve(math.isqrt(hi - 1) + 1)
    size = hi - lo
    rem = np.arange(lo, hi, dtype=np.int64)
    sig = np.ones(size, dtype=np.int64)
    for p in base.tolist():
        if p * p >= hi:
            break
        pk, prev_sigma, cur_sigma = p, 1, 1 + p
        while pk < hi:
            start = (-lo) % pk
            if start >= size:
                break
            view = slice(start, None, pk)
            rem[view] //= p
            if pk == p:
                sig[view] *= cur_sigma
            else:
                sig[view] = sig[view] // prev_sigma * cur_sigma
            pk *= p
            prev_sigma, cur_sigma = cur_sigma, cur_sigma + pk
    big = rem > 1
    sig[big] *= rem[big] + 1
    return sig


def sigma_blocks(lo: int, hi: int, block_size: int = DEFAULT_BLOCK, cap: int = DEFAULT_CAP,
                 threads: int = 1) -> Iterator[tuple[int, np.ndarray]]:
    """(start, sigma array) for consecutive blocks covering [lo, hi]."""
    _check_range(lo, hi, cap)
    base = simple_sieve(math.isqrt(hi) + 1)
    tasks = ((s, min(s + block_size, hi + 1), base) for s in range(lo, hi + 1, block_size))
    starts = range(lo, hi + 1, block_size)
    yield from zip(starts, ordered_map(sigma_block, tasks, threads))


def sigma_sieve(lo: int, hi: int, block_size: int = DEFAULT_BLOCK, cap: int = DEFAULT_CAP) -> Iterator[tuple[int, int]]:
    """Stream of (n, sigma(n)) for lo <= n <= hi."""
    for start, sig in sigma_blocks(lo, hi, block_size, cap):
        for i, s in enumerate(sig.tolist()):
            yield start + i, s


# -- bound scans ------------------------------------------------------------


@dataclass(frozen=True)
class BoundSpec:
    """sigma(n)/n < factor * e^gamma * log log(multiplier * n), tested on
    n in the range with n % step == offset."""

    factor: Fraction = Fraction(1)
    multiplier: int = 1
    step: int = 1
    offset: int = 0
    name: str = "robin"


ROBIN = BoundSpec()
UNCONDITIONAL = BoundSpec(Fraction(10000005645, 10**10), name="unconditional")
ODD_PART = BoundSpec(Fraction(524288, 1048575), 2**19, 2, 1, "odd-part")


def certified_margin(n: int, sigma_n: int, spec: BoundSpec, digits: int = DEFAULT_DIGITS):
    """(verdict order, margin interval) for one n; LESS means the bound holds."""
    lhs = Fraction(sigma_n, n)

    def build(d):
        loglog = log_i(log_int(spec.multiplier * n, d))
        return IntervalReal.exact(lhs, d), exp_gamma(d) * loglog * IntervalReal.exact(spec.factor, d)

    order = decide(build, digits)
    a, b = build(digits)
    return order, b - a


@dataclass
class RangeReport:
    lo: int
    hi: int
    checked: int
    violators: list[int]
    min_margin: IntervalReal | None
    min_margin_n: int | None
    escalations: int = 0
    undecided: list[int] = field(default_factory=list)
    out_of_domain: list[int] = field(default_factory=list)
    bound: str = "robin"
    runtime_stats: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        # runtime_stats stays out so that artifacts are reproducible.
        return {
            "bound": self.bound,
            "lo": self.lo,
            "hi": self.hi,
            "checked": self.checked,
            "violators": self.violators,
            "out_of_domain": self.out_of_domain,
            "undecided": self.undecided,
            "escalations": self.escalations,
            "min_margin": None if self.min_margin is None else {
                "n": self.min_margin_n,
                "lo": sci(self.min_margin.lo, 20),
                "hi": sci(self.min_margin.hi, 20),
            },
        }


def _scan_block(lo: int, hi: int, base: np.ndarray, spec: BoundSpec) -> dict:
    """Fast path over [lo, hi): float decisions plus the n needing intervals."""
    sig = sigma_block(lo, hi, base)
    n = np.arange(lo, hi, dtype=np.int64)
    keep = (n % spec.step) == spec.offset
    n, sig = n[keep], sig[keep]
    if len(n) == 0:
        return {"count": 0, "violators": [], "out_of_domain": [], "escalate": [], "min_candidates": [], "sigma": {}}
    nf = n.astype(np.float64)
    ratio = sig.astype(np.float64) / nf
    with np.errstate(invalid="ignore", divide="ignore"):
        loglog = np.log(np.log(nf * spec.multiplier))
        rhs = float(spec.factor) * math.exp(EULER_GAMMA) * loglog
        diff = np.log(rhs) - np.log(ratio)  # > 0 means the bound holds
    bad_domain = ~(loglog > 0)
    near = (np.abs(diff) < GUARD_BAND) | (n < EXACT_BELOW)
    fast_violators = n[(diff < 0) & ~near & ~bad_domain]
    escalate = n[near & ~bad_domain]
    margin = np.where(bad_domain, np.inf, rhs - ratio)
    # Everything that could be the true minimum once float error is allowed for.
    ok = ~bad_domain & (diff > 0)
    candidates: list[int] = []
    if ok.any():
        m = float(np.min(margin[ok]))
        slack = 1e-9 * (abs(m) + float(np.max(ratio[ok])))
        candidates = n[ok & (margin <= m + slack)].tolist()
    sig_lookup = {}
    for v in escalate.tolist() + candidates + n[bad_domain].tolist():
        sig_lookup[v] = int(sig[v - n[0]] if spec.step == 1 else sig[np.searchsorted(n, v)])
    return {
        "count": int(len(n)),
        "violators": fast_violators.tolist(),
        "out_of_domain": n[bad_domain].tolist(),
        "escalate": escalate.tolist(),
        "min_candidates": candidates,
        "sigma": sig_lookup,
    }


def bound_scan(lo: int, hi: int, spec: BoundSpec = ROBIN, block_size: int = DEFAULT_BLOCK,
               cap: int = DEFAULT_CAP, threads: int = 1, digits: int = DEFAULT_DIGITS) -> RangeReport:
    """Exhaustive check of ``spec`` on [lo, hi]."""
    _check_range(lo, hi, cap)
    started = time.perf_counter()
    base = simple_sieve(math.isqrt(hi) + 1)
    tasks = ((s, min(s + block_size, hi + 1), base, spec) for s in range(lo, hi + 1, block_size))
    checked, violators, undecided, out_of_domain = 0, [], [], []
    escalations = 0
    min_iv, min_n = None, None
    pending_min: list[tuple[int, int]] = []
    best_float = math.inf
    for res in ordered_map(_scan_block, tasks, threads):
        checked += res["count"]
        violators.extend(res["violators"])
        out_of_domain.extend(res["out_of_domain"])
        for v in res["escalate"]:
            escalations += 1
            order, _ = certified_margin(v, res["sigma"][v], spec, digits)
            if order is CertifiedOrder.GREATER:
                violators.append(v)
            elif order is CertifiedOrder.UNDECIDED:
                undecided.append(v)
        for v in res["min_candidates"]:
            s = res["sigma"][v]
            approx = float(spec.factor) * math.exp(EULER_GAMMA) * math.log(math.log(v * spec.multiplier)) - s / v
            if approx <= best_float + 1e-9 * (abs(best_float) + 10):
                pending_min.append((v, s))
                best_float = min(best_float, approx)
    for v, s in pending_min:
        order, margin = certified_margin(v, s, spec, digits)
        if order is CertifiedOrder.LESS and (min_iv is None or margin.lo < min_iv.lo):
            min_iv, min_n = margin, v
    violators.extend(out_of_domain)
    return RangeReport(
        lo, hi, checked, sorted(set(violators)), min_iv, min_n, escalations, sorted(undecided),
        sorted(out_of_domain), spec.name, {"seconds": time.perf_counter() - started, "blocks": -(-(hi - lo + 1) // block_size)},
    )


def robin_scan(lo: int, hi: int, **kw) -> RangeReport:
    """Violators of sigma(n)/n < e^gamma log log n on [lo, hi]; n = 2 counts
    as a violator (out of domain, log log 2 < 0)."""
    return bound_scan(lo, hi, ROBIN, **kw)
