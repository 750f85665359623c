"""
Checking the CSMA simulator against the exact oracle
====================================================

"""

import numpy as np

from bethe_csma.graph import make_topology
from bethe_csma.sim import estimate_vs_oracle, simulate

g = make_topology("ring", 6)
r = np.random.default_rng(0).uniform(-2, 2, g.n)

# Time-averaged busy fractions over 1e6 time units, with bands from the chain's asymptotic variance.
cmp = estimate_vs_oracle(g, r, 1e6, seed=0)
for i in range(g.n):
    z = (cmp.estimate[i] - cmp.exact[i]) / cmp.sigma[i]
    print(f"link {i}: simulated {cmp.estimate[i]:.4f}  exact {cmp.exact[i]:.4f}  z {z:+.2f}")
print("all within 3 sigma:", cmp.all_within)

# The same seed replays the same path.
a, b = simulate(g, r, 1e4, seed=3), simulate(g, r, 1e4, seed=3)
print("replay identical:", np.array_equal(a.rates, b.rates))
