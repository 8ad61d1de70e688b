"""Which n are covered without any computation over primes.

Shows the nu_2 threshold for a few odd parts, classifies some factored
inputs (including one far too large to write out) and runs the exact
constant checks.
"""
from robinkit.arith import Factorization
from robinkit.families import classify, nu2_threshold, verify_proof_constants

for c in (1, 3, 3**13 * 5**8 * 7**7 * 11**6, 10**30 + 1):
    t = nu2_threshold(c)
    print(f"  c={c:<32} rhs={t.rhs.format(12)}  k_min={t.k_min}  ceiled={t.k_ceiled}")

for text in ("2^19*3", "2^20*3^13*5^8*7^7*11^6", "2^25*3", "2^40*3^30*5^20*7^20*11^20*1000003^100000"):
    v = classify(Factorization.parse(text))
    print(f"\n{text}\n  guaranteed={v.guaranteed} witnesses={v.witnesses}")
    for note in v.notes:
        print("  note:", note)

print()
for check in verify_proof_constants():
    print(f"  [{'ok' if check.passed else 'FAIL'}] {check.name}")
