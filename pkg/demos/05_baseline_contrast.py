"""
BUM against measurement-driven baselines
========================================

"""

import warnings

from bethe_csma.bum import ConcavityWarning, UtilitySpec, bum_recover_intensity, bum_run, k_b_optimum
from bethe_csma.graph import make_topology
from bethe_csma.oracle import service_rates
from bethe_csma.sim import run_baseline

g = make_topology("star", 5)
u = UtilitySpec(1.0, 1.0)
target = u.total(k_b_optimum(g, u)[0])

# BUM needs no measurements: every update is a closed-form computation.
with warnings.catch_warnings():
    warnings.simplefilter("ignore", ConcavityWarning)
    y = bum_run(g, u, T=1000).final_y
print(f"bum   gap {target - u.total(service_rates(g, bum_recover_intensity(g, y))):.4f}")

# The baselines must estimate service rates by running the network for a frame per update.
for kind in ("jw", "ejw", "ssca"):
    c = run_baseline(g, kind, u, 300, seed=1)
    gap = target - u.total(service_rates(g, c.final_r))
    print(f"{kind:5s} gap {gap:.4f} after {c.sim_time[-1]:.0f} time units of measurement")
