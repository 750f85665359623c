"""
Exact service rates on a small interference graph
==================================================

"""

# A schedule is an independent set of the interference graph, stored as a bitmask.
import numpy as np

from bethe_csma.graph import enumerate_feasible_schedules, make_topology
from bethe_csma.oracle import service_rates, stationary_distribution

g = make_topology("ring", 6)
sched = enumerate_feasible_schedules(g)
print(g.name, "has", len(sched.masks), "feasible schedules")

# With intensities r, schedule sigma has probability proportional to exp(sigma . r).
r = np.array([0.0, 1.0, -1.0, 2.0, 0.5, 0.0])
dist = stationary_distribution(g, r)
top = np.argsort(dist.probabilities)[::-1][:5]
for k in top:
    bits = format(int(sched.masks[k]), f"0{g.n}b")[::-1]  # link 0 first
    print(f"  {bits} -> {dist.probabilities[k]:.4f}")

# Service rates are the marginal probability that each link is on.
print("service rates:", np.round(service_rates(g, r), 4))
print("log partition:", round(dist.log_partition, 6))
