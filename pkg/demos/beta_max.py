"""beta_max for a few epsilons, and the exceptions it bounds.

For each eps the engine adds log(p/(p-1)) and log p prime by prime until
the primorial passes n_beta.  The exception list for eps = 1/4 is then
enumerated from the per-omega cutoffs.

usage: python demos/beta_max.py [P/Q ...]
"""
import sys
from fractions import Fraction

from robinkit.exception_finder import EnumerationStats, build_beta_table, enumerate_exceptions
from robinkit.primes import SieveConfig, find_beta_max

eps_list = [Fraction(a) for a in sys.argv[1:]] or [Fraction(1, 2), Fraction(1, 10), Fraction(1, 100), Fraction(1, 10000)]
cfg = SieveConfig(segment_size=1 << 18)

print(f"{'eps':>8} {'beta_max':>9} {'p':>9}  log log n_beta_max")
for eps in eps_list:
    r = find_beta_max(eps, cfg, digits=60)
    print(f"{str(eps):>8} {r.beta_max:>9} {r.p_beta_max:>9}  {r.loglog_n_beta_max.format(20)}")

stats = EnumerationStats()
exc = sorted(r.n for r in enumerate_exceptions(build_beta_table(Fraction(1, 4)), stats=stats))
print(f"\neps = 1/4: {len(exc)} exceptions, largest {exc[-1]}")
print("  cutoff per omega:", dict(sorted(stats.cutoffs.items())))
