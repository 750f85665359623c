"""
How far BAS intensities miss their targets
==========================================

"""

import numpy as np

from bethe_csma.bas import bas_intensity
from bethe_csma.bethe import bethe_error_at
from bethe_csma.graph import make_topology, symmetric_capacity
from bethe_csma.oracle import service_rates

# On a tree the closed-form intensities hit the targets exactly.
star = make_topology("star", 5)
lam = np.array([0.2, 0.1, 0.15, 0.3, 0.05])
print("star-5 error:", np.abs(service_rates(star, bas_intensity(star, lam)) - lam).max())

# A triangle is the smallest loop; every link receives 4/21 instead of 0.2.
rep = bethe_error_at(make_topology("complete", 3), np.full(3, 0.2))
print("K3 service:", rep.service, "normalized error:", rep.normalized_max)

# Sweep symmetric loads as a fraction of the largest symmetric rate the graph supports.
for g in (make_topology("complete", 5), make_topology("ring", 8), make_topology("grid", width=3, height=3)):
    cap = symmetric_capacity(g)
    errs = [bethe_error_at(g, np.full(g.n, L * cap)).normalized_max for L in np.arange(1, 10) / 10]
    print(f"{g.name:12s} capacity {float(cap):.4f}  errors", np.round(errs, 4))
