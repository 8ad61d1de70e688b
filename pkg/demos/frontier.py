"""Walk up to 5040 and a little past it.

Prints every n <= 5040 that fails sigma(n)/n < e^gamma log log n, then
scans (5040, 10^6] and reports the tightest margin found there.
"""
from robinkit.arith import factorize, robin_check
from robinkit.bulk import robin_scan

low = robin_scan(2, 5040)
print(f"{len(low.violators)} failures up to 5040:")
print(" ", low.violators)

for n in (5040, 5041, 10080):
    r = robin_check(factorize(n))
    margin = "n/a" if r.lhs is None else r.margin.format(8)
    print(f"  n={n:>6}  {r.verdict.value:<5}  rhs - lhs = {margin}")

high = robin_scan(5041, 10**6)
print(f"(5040, 1e6]: {len(high.violators)} failures, {high.escalations} interval re-checks")
print(f"  smallest margin {high.min_margin.format(10)} at n = {high.min_margin_n}")
