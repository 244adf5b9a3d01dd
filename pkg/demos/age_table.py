"""
Amalgamation checks for a few classic classes
=============================================

Runs every bounded check on graphs, chains and posets and prints a table.
Expect about half a minute: amalgamated extension on graphs dominates.
"""

import time

from fraisse_forge.ages import CHECKS, chains, graphs, posets, run_check

N = 3
classes = [("graphs", graphs()), ("chains", chains()), ("posets", posets())]

print(f"{'class':8}" + "".join(f"{p:>11}" for p in CHECKS))
for name, spec in classes:
    row = []
    for p in CHECKS:
        t0 = time.perf_counter()
        r = run_check(p, spec, N)
        row.append(f"{'yes' if r.holds else 'NO'} {time.perf_counter() - t0:4.1f}s")
    print(f"{name:8}" + "".join(f"{c:>11}" for c in row))

# the one failure, with its witness
r = run_check("strict_ap", chains(), N)
print()
print(r.summary())
