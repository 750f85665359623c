"""One-shot intensity assignment from target service rates.

Each link needs only its own target and its neighbours' targets, so the
whole computation is a single round of neighbour message passing.
"""
from __future__ import annotations

import numpy as np

from .bethe import check_domain
from .errors import DomainError
from .graph import InterferenceGraph


def bas_intensity(g: InterferenceGraph, lam) -> np.ndarray:
    """Intensities that make ``lam`` a stationary point of the Bethe free energy.

    ``r_i = log(lam_i (1-lam_i)^(d_i-1) / prod_{j in N(i)} (1-lam_i-lam_j))``;
    an isolated link gets the plain logit.  ``lam`` must lie strictly inside
    the marginal polytope.
    """
    lam = check_domain(g, lam, interior=True)
    r = np.log(lam) + (g.degrees - 1) * np.log1p(-lam)
    if g.num_edges:
        ls = np.log(1.0 - lam[g.edge_u] - lam[g.edge_v])
        r -= np.bincount(g.edge_u, ls, g.n) + np.bincount(g.edge_v, ls, g.n)
    return r


def max_admissible_margin(g: InterferenceGraph, lam) -> float:
    """Supremum of ``eps`` keeping ``lam + eps`` strictly interior."""
    lam = np.asarray(lam, dtype=float)
    bounds = [1.0 - lam.max()]
    if g.num_edges:
        bounds.append(((1.0 - lam[g.edge_u] - lam[g.edge_v]) / 2.0).min())
    return float(min(bounds))


def bas_with_margin(g: InterferenceGraph, lam, eps: float) -> np.ndarray:
    """BAS on the inflated targets ``lam + eps``, aiming for ``s_i > lam_i``."""
    lam = np.asarray(lam, dtype=float)
    try:
        return bas_intensity(g, lam + eps)
    except DomainError as exc:
        raise DomainError(
            f"{exc}; inflated targets leave the polytope, "
            f"eps must be below {max_admissible_margin(g, lam):.6g}"
        ) from None
