"""
Bracket growth on the two-element set
=====================================

How many ternary operations are reachable at each term depth from a few
generating sets.
"""

from fraisse_forge.clones import CloneFragment, OpTable, all_tables, bracket, cayley_depth, projections

generators = {
    "all binary": all_tables(2, 2),
    "nand": {OpTable(2, 2, (1, 1, 1, 0))},
    "and, or, not": {OpTable(2, 2, (0, 0, 0, 1)), OpTable(2, 2, (0, 1, 1, 1)), OpTable(2, 1, (1, 0))},
    "and, or": {OpTable(2, 2, (0, 0, 0, 1)), OpTable(2, 2, (0, 1, 1, 1))},
    "projections": projections(2, 2),
}

K = 3
target = all_tables(2, K)
for name, gens in generators.items():
    u = CloneFragment(2, frozenset(gens))
    d = cayley_depth(u, K, target)
    sizes, i = [], 0
    while True:
        sizes.append(len(bracket(u, K, i)))
        if len(sizes) > 1 and sizes[-1] == sizes[-2] or sizes[-1] == len(target):
            break
        i += 1
    print(f"{name:14} depth {str(d):>4}  sizes {sizes}")
