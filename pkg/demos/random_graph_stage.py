"""
A finite stage of the random graph
==================================

Saturates one-point extensions over the class of all graphs and looks at
the adjacency matrix of the result.  At bound 2 a perfect matching already
qualifies: every vertex has a neighbour and a non-neighbour.
"""

import numpy as np

from fraisse_forge.ages import graphs
from fraisse_forge.limits import saturate_limit, verify_extension_property, verify_partial_homogeneity

res = saturate_limit(graphs(), 2, 100)
u = res.final
print(f"{len(res.stages)} stages, {u.size} vertices, converged: {not res.exhausted}")

adj = np.zeros((u.size, u.size), dtype=int)
for x, y in u["E"]:
    adj[x, y] = 1
print(adj)
print("degrees", adj.sum(axis=1))

print(verify_extension_property(u, graphs(), 2).summary())
print(verify_partial_homogeneity(u, graphs(), 1, 2).summary())

# the queue audit: tasks are served in the order they were enqueued
served = [row["task"] for row in res.audit if row["event"] == "discharged"]
print(f"{len(res.audit)} audit rows, {len(served)} tasks discharged, in order: {served == sorted(served)}")
