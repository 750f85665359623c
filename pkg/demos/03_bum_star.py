"""
Bethe utility maximization on a star
====================================

"""

import warnings

import numpy as np

from bethe_csma.bum import (ConcavityWarning, UtilitySpec, bum_recover_intensity, bum_run, k_b_optimum,
                            lemma2_diagnostics)
from bethe_csma.graph import make_topology
from bethe_csma.oracle import service_rates

g = make_topology("star", 5)
u = UtilitySpec(alpha=1.0, beta=1.0)

# beta below 2 d / alpha, so concavity is not guaranteed; silence the notice.
with warnings.catch_warnings():
    warnings.simplefilter("ignore", ConcavityWarning)
    trace = bum_run(g, u, T=1000)

y_star, k_star = k_b_optimum(g, u)
print("final y :", np.round(trace.final_y, 5))
print("optimum :", np.round(y_star, 5), "K_B* =", round(k_star, 5))
print("weighted gap after 1000 steps:", trace.mu_gap(k_star))

# On a tree the Bethe rates are exact, so the recovered intensities deliver y itself.
r = bum_recover_intensity(g, trace.final_y)
print("achieved utility:", u.total(service_rates(g, r)))

diag = lemma2_diagnostics(trace)
print("iterates stayed interior:", diag.all_interior, " last clamp at t =", diag.last_clamp_t)
