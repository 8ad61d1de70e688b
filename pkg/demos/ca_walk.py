"""Colossally abundant numbers and the margin along them.

Lists the first CA numbers with the prime that produced each one, then
checks the inequality on every CA number up to log log n = 12 and scans
the gaps between consecutive CA numbers below 10^7.
"""
from robinkit.ca import ca_sequence, ca_values_upto, gap_check, verify_robin_on_ca

for ca in ca_sequence(3.2):
    print(f"  {ca.value:>14}  x{ca.prime:<3} {ca.factorization}")

rep = verify_robin_on_ca(12.0)
s = rep.summary()
print(f"\n{s['count']} CA numbers up to log log n = 12: {s['holds']} hold, {s['fails']} fail")
print(f"  tightest above 5040: index {s['min_margin_above_5040']['index']}, margin >= {s['min_margin_above_5040']['lo']}")

values = ca_values_upto(10**7)
bad = [v for a, b in zip(values, values[1:]) for v in gap_check(a, b).violators_above_5040]
print(f"gaps between {len(values)} CA numbers below 1e7: {len(bad)} failures above 5040")
