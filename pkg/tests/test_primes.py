import signal
import subprocess
import sys
import time
from fractions import Fraction

import gmpy2
import mpmath
import pytest
import sympy

import oracles
from robinkit.errors import CheckpointError, InvalidArgumentError, PrecisionError
from robinkit.primes import (
    MertensAccumulator,
    SieveConfig,
    accumulate,
    find_beta_max,
    nth_prime,
    prime_count,
    primes_stream,
    read_checkpoint,
    sieve_segment,
    simple_sieve,
    write_checkpoint,
)
from robinkit.primes import _CHECKPOINT_FIELDS as CHECKPOINT_FIELDS

SMALL = SieveConfig(segment_size=1 << 16, thread_count=1)

# Frozen from oracles.beta_max_scan (50-digit per-prime loop):
# eps -> (beta_max, p_beta_max, log log n_beta_max to 19 digits)
BETA_MAX = {
    Fraction(1, 2): (4, 7, "1.637590160403415079"),
    Fraction(1, 4): (7, 17, "2.488113549962938785"),
    Fraction(1, 10): (14, 43, "3.601607937545223320"),
    Fraction(1, 100): (177, 1051, "6.926243236785802825"),
    Fraction(1, 1000): (4230, 40283, "10.59803169129315752"),
}


def encloses(iv, text: str, tol: str) -> bool:
    v, t = gmpy2.mpq(text), gmpy2.mpq(tol)
    return iv.lo <= v + t and v - t <= iv.hi


def test_primes_stream_small():
    assert list(primes_stream(10, SMALL)) == [2, 3, 5, 7]
    ps = list(primes_stream(100, SMALL))
    assert len(ps) == 25 and ps[-1] == 97


def test_primes_stream_resumes_from_start():
    assert list(primes_stream(200, SMALL, start=100)) == list(sympy.primerange(100, 201))


def test_nth_prime():
    assert nth_prime(1) == 2 and nth_prime(6) == 13 and nth_prime(25) == 97
    assert nth_prime(10**6) == sympy.prime(10**6)


def test_sieve_segment_against_sympy():
    base = tuple(simple_sieve(10**5)[1:].tolist())  # odd primes
    seg = sieve_segment(10**9, 10**9 + 10**5, base)
    assert seg.tolist() == list(sympy.primerange(10**9, 10**9 + 10**5))


@pytest.mark.slow
def test_prime_count_1e9():
    assert prime_count(10**9, SieveConfig(thread_count=1)) == 50847534


def test_prime_count_matches_sympy():
    for n in (10**5, 3 * 10**6, 10**7 + 19):
        assert prime_count(n, SMALL) == sympy.primepi(n)


def test_accumulate_small_examples():
    acc = accumulate(limit=10, cfg=SMALL)
    m = mpmath.MPContext()
    m.dps = 60
    assert encloses(acc.logsum, m.nstr(m.log(m.mpf(35) / 8), 55), "1e-50")
    assert encloses(acc.theta, m.nstr(m.log(210), 55), "1e-50")
    one = accumulate(count=1, cfg=SMALL)
    assert encloses(one.logsum, m.nstr(m.log(2), 55), "1e-50")


def test_accumulate_argument_errors():
    with pytest.raises(PrecisionError):
        accumulate(limit=100, digits=10)
    with pytest.raises(InvalidArgumentError):
        accumulate(limit=100, count=5)
    with pytest.raises(InvalidArgumentError):
        SieveConfig(segment_size=100)


def _reference_sums(primes, dps):
    m = mpmath.MPContext()
    m.dps = dps
    s = m.fsum(m.log1p(1 / m.mpf(int(p) - 1)) for p in primes)
    t = m.fsum(m.log(int(p)) for p in primes)
    return m, s, t


def test_error_bound_soundness_fast_path():
    """Fast-path accumulation over 2*10^5 primes against a recomputation at
    three times the working precision."""
    digits = 40
    acc = accumulate(count=200_000, cfg=SMALL, digits=digits)
    primes = sympy.primerange(2, sympy.prime(200_000) + 1)
    m, s, t = _reference_sums(list(primes), 3 * digits)
    for iv, ref in ((acc.logsum, s), (acc.theta, t)):
        assert encloses(iv, m.nstr(ref, 3 * digits - 5), "0")
        assert float(iv.width) / 2 <= acc.error_bound * (1 + 1e-9)
        assert abs(float(iv.mid) - float(ref)) < acc.error_bound + 1e-300


@pytest.mark.slow
def test_error_bound_soundness_1e7_primes():
    digits = 40
    acc = accumulate(count=10**7, cfg=SieveConfig(1 << 22, 1), digits=digits)
    primes = simple_sieve(int(sympy.prime(10**7)))
    assert len(primes) == 10**7
    # Exact reference: every term at 120 digits with gmpy2, summed exactly.
    down = gmpy2.context(precision=420, round=gmpy2.RoundDown)
    up = gmpy2.context(precision=420, round=gmpy2.RoundUp)
    s_lo = s_hi = t_lo = t_hi = gmpy2.mpfr(0)
    for p in primes.tolist():
        s_lo = down.add(s_lo, down.log(down.div(p, p - 1)))
        s_hi = up.add(s_hi, up.log(up.div(p, p - 1)))
        t_lo = down.add(t_lo, down.log(p))
        t_hi = up.add(t_hi, up.log(p))
    assert acc.logsum.lo <= s_lo and s_hi <= acc.logsum.hi
    assert acc.theta.lo <= t_lo and t_hi <= acc.theta.hi
    # Tight enough to matter: the theta radius scales with theta itself (about 1.4e-19 relative here).
    assert acc.logsum_error < 1e-18
    assert acc.theta_error < 1e-18 * float(t_hi)


def test_sums_match_quad_precision_oracle(tmp_path):
    """10^6 primes through the fast path against the independent C program."""
    exe = oracles.build_crossing_quad(tmp_path)
    if exe is None:
        pytest.skip("no C compiler with libquadmath")
    p, s, t, _ = oracles.crossing_quad_rows(exe, 1771560, 10**6, 10**6)[10**6]
    acc = accumulate(count=10**6, cfg=SMALL, digits=60)
    assert acc.last_prime == p == 15485863
    assert encloses(acc.logsum, s, "1e-27")  # quad worst case: 1e6 * 2^-113 * S < 4e-28
    assert encloses(acc.theta, t, "1e-22")


def test_accumulator_monotone():
    prev = None
    acc = MertensAccumulator(40)
    for p in simple_sieve(2000).tolist():
        acc.add_prime(p)
        if prev is not None:
            assert acc.logsum.lo > prev[0] and acc.theta.lo > prev[1]
        prev = (acc.logsum.hi, acc.theta.hi)


@pytest.mark.parametrize("eps", sorted(BETA_MAX))
def test_find_beta_max_matches_oracle(eps):
    beta, p, loglog = BETA_MAX[eps]
    res = find_beta_max(eps, SMALL, digits=60)
    assert (res.beta_max, res.p_beta_max) == (beta, p)
    assert encloses(res.loglog_n_beta_max, loglog, "1e-17")  # frozen to 19 digits
    assert res.margin_at.lo > 0 and res.margin_before.hi < 0
    assert res.reversals == []
    b, ll = res
    assert b == beta


def test_oracle_values_are_frozen():
    for eps in (Fraction(1, 2), Fraction(1, 10), Fraction(1, 100)):
        beta, p, loglog, h, h_prev = oracles.beta_max_scan(eps)
        assert (beta, p) == BETA_MAX[eps][:2]
        assert mpmath.nstr(loglog, 19, strip_zeros=False).startswith(BETA_MAX[eps][2][:18])
        assert h > 0 > h_prev


def test_beta_max_fast_path_1e4():
    res = find_beta_max(Fraction(1, 10000), SMALL, digits=60)
    assert (res.beta_max, res.p_beta_max) == (144795, 1939787)
    assert res.overshoot_checked >= 100_000 and res.reversals == []


def test_beta_max_rejects_bad_eps():
    with pytest.raises(InvalidArgumentError):
        find_beta_max(Fraction(0), SMALL)
    with pytest.raises(InvalidArgumentError):
        find_beta_max(Fraction(3, 2), SMALL)


def _state(acc):
    return tuple(x.digits(16) for x in (acc.s_lo, acc.s_hi, acc.t_lo, acc.t_hi)) + (acc.count, acc.last_prime)


def test_determinism_across_thread_counts():
    states = set()
    for threads in (1, 2, 8):
        cfg = SieveConfig(segment_size=1 << 16, thread_count=threads)
        states.add(_state(accumulate(limit=5_000_000, cfg=cfg, digits=50)))
    assert len(states) == 1


def test_beta_max_determinism_across_thread_counts():
    out = set()
    for threads in (1, 2, 8):
        r = find_beta_max(Fraction(1, 10000), SieveConfig(1 << 16, threads), digits=50)
        out.add((r.beta_max, r.p_beta_max, _state(r.accumulator), r.loglog_n_beta_max.lo.digits(16)))
    assert len(out) == 1


def test_checkpoint_round_trip(tmp_path):
    path = tmp_path / "a.rbl"
    cfg = SieveConfig(1 << 16, 1, str(path), 1)
    full = accumulate(limit=2_000_000, cfg=SieveConfig(1 << 16, 1), digits=50)
    accumulate(limit=2_000_000, cfg=cfg, digits=50)
    rec = read_checkpoint(path)
    assert rec["kind"] == "accumulate-limit" and rec["target"] == "2000000"
    # A resumed run from the final checkpoint ends in the identical state.
    again = accumulate(limit=2_000_000, cfg=cfg, digits=50)
    assert _state(again) == _state(full)


def test_checkpoint_corruption_detected(tmp_path):
    path = tmp_path / "c.rbl"
    cfg = SieveConfig(1 << 16, 1, str(path), 1)
    accumulate(limit=1_000_000, cfg=cfg, digits=50)
    raw = bytearray(path.read_bytes())
    raw[20] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError):
        accumulate(limit=1_000_000, cfg=cfg, digits=50)
    path.write_bytes(b"junk")
    with pytest.raises(CheckpointError):
        read_checkpoint(path)


def test_checkpoint_mismatch_refused(tmp_path):
    path = tmp_path / "m.rbl"
    accumulate(limit=1_000_000, cfg=SieveConfig(1 << 16, 1, str(path), 1), digits=50)
    with pytest.raises(CheckpointError):
        accumulate(limit=1_000_000, cfg=SieveConfig(1 << 17, 1, str(path), 1), digits=50)


def test_checkpoint_write_failure_is_not_fatal(tmp_path):
    cfg = SieveConfig(1 << 16, 1, str(tmp_path / "missing" / "x.rbl"), 1)
    a = accumulate(limit=1_000_000, cfg=cfg, digits=50)
    b = accumulate(limit=1_000_000, cfg=SieveConfig(1 << 16, 1), digits=50)
    assert _state(a) == _state(b)


def test_write_checkpoint_unwritable(tmp_path):
    with pytest.raises(CheckpointError):
        write_checkpoint(tmp_path / "no" / "such" / "dir.rbl", {k: "0" for k in CHECKPOINT_FIELDS})


KILL_SCRIPT = """
import sys
from robinkit.primes import accumulate, SieveConfig
cfg = SieveConfig(1 << 16, 1, sys.argv[1], 1)
acc = accumulate(limit=60_000_000, cfg=cfg, digits=50)
print(acc.s_lo.digits(16), acc.s_hi.digits(16), acc.t_lo.digits(16), acc.t_hi.digits(16), acc.count)
"""


def test_kill_and_resume(tmp_path):
    """SIGKILL a run once a checkpoint exists, resume it, and compare with an
    uninterrupted run."""
    path = tmp_path / "k.rbl"
    proc = subprocess.Popen([sys.executable, "-c", KILL_SCRIPT, str(path)], stdout=subprocess.PIPE, text=True)
    deadline = time.time() + 120
    while not path.exists() and time.time() < deadline:
        time.sleep(0.05)
    time.sleep(0.5)
    proc.send_signal(signal.SIGKILL)
    proc.wait()
    assert path.exists(), "no checkpoint was written before the kill"
    partial = read_checkpoint(path)
    assert 0 < int(partial["next_lo"]) < 60_000_000
    resumed = subprocess.run([sys.executable, "-c", KILL_SCRIPT, str(path)], capture_output=True, text=True, check=True)
    clean = subprocess.run([sys.executable, "-c", KILL_SCRIPT, str(tmp_path / "fresh.rbl")],
                           capture_output=True, text=True, check=True)
    assert resumed.stdout == clean.stdout
    assert int(resumed.stdout.split()[-1]) == 3562115  # pi(6*10^7)
