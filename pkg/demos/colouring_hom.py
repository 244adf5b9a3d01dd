"""
A universal 3-colouring
=======================

Builds stages of a map from a large graph onto the triangle so that every
coloured graph on at most three vertices embeds colour-compatibly, then
pulls a copy of the triangle back out as a section.
"""

from collections import Counter

from fraisse_forge.ages import graphs
from fraisse_forge.comma import Scenario, build_universal_hom, check_target_extension, extract_section, verify_universality
from fraisse_forge.structures import complete_graph

K3 = complete_graph(3)
sc = Scenario(graphs(), K3, k=3, budget=150)
res = build_universal_hom(sc)
print(f"{len(res)} stages, final size {res.final.size}")
print("colour classes", sorted(Counter(res.u).items()))

print(verify_universality(res, sc, 3).summary())
iota = extract_section(res, sc)
print("section", iota.map if iota else None)

# no finite target can extend every colouring: K4 has no 3-colouring
print(check_target_extension(Scenario(graphs(), K3), 4).summary())
