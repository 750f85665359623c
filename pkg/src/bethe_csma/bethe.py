"""Bethe free energy on the marginal polytope ``D_B``.

For the hard-core CSMA model every pairwise marginal is fixed by the two
first-order marginals, so the Bethe functional depends on the rate vector
``y`` alone.  ``D_B`` is ``{y >= 0, y_i + y_j <= 1 on edges}``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import DomainError
from .graph import InterferenceGraph

INTERIOR_MARGIN = 1e-12


@dataclass(frozen=True)
class BetheDomainPoint:
    y: np.ndarray
    slack: np.ndarray
    margin: float

    @property
    def interior(self) -> bool:
        return self.margin > INTERIOR_MARGIN


def domain_point(g: InterferenceGraph, y) -> BetheDomainPoint:
    y = np.asarray(y, dtype=float)
    if y.shape != (g.n,):
        raise ValueError(f"rate vector must have length {g.n}, got shape {y.shape}")
    slack = 1.0 - y[g.edge_u] - y[g.edge_v]
    margin = float(min(y.min(), slack.min() if slack.size else np.inf, (1.0 - y).min()))
    return BetheDomainPoint(y, slack, margin)


def coordinate_margins(g: InterferenceGraph, y) -> np.ndarray:
    """Per-link distance to the boundary: ``min(y_i, 1 - y_i, slack of every edge at i)``."""
    y = np.asarray(y, dtype=float)
    m = np.minimum(y, 1.0 - y)
    if g.num_edges:
        slack = 1.0 - y[g.edge_u] - y[g.edge_v]
        np.minimum.at(m, g.edge_u, slack)
        np.minimum.at(m, g.edge_v, slack)
    return m


def check_domain(g: InterferenceGraph, y, *, interior: bool) -> np.ndarray:
    """Validate ``y`` against ``D_B`` and return it as a float array.

    With ``interior=True`` every ``y_i`` and every edge slack must exceed
    the interior margin; otherwise only closed-set membership is required.
    The error names the first offending link or edge.
    """
    pt = domain_point(g, y)
    y = pt.y
    if not np.all(np.isfinite(y)):
        raise DomainError("rate vector contains non-finite entries")
    thr = INTERIOR_MARGIN if interior else 0.0
    bad = np.flatnonzero(y <= thr) if interior else np.flatnonzero(y < 0)
    if bad.size:
        i = int(bad[0])
        what = "y_i > 0" if interior else "y_i >= 0"
        raise DomainError(f"link {i}: y_{i}={float(y[i])!r} violates {what}")
    bad = np.flatnonzero(1.0 - y <= thr) if interior else np.flatnonzero(y > 1.0)
    if bad.size:
        i = int(bad[0])
        rel = "<" if interior else "<="
        raise DomainError(f"link {i}: y_{i}={float(y[i])!r} violates y_i {rel} 1")
    bad = np.flatnonzero(pt.slack <= thr) if interior else np.flatnonzero(pt.slack < 0)
    if bad.size:
        k = int(bad[0])
        i, j = g.edges[k]
        rel = "<" if interior else "<="
        raise DomainError(
            f"edge ({i}, {j}): y_{i} + y_{j} = {float(y[i] + y[j])!r} violates y_i + y_j {rel} 1"
        )
    return y


def bethe_entropy(g: InterferenceGraph, y) -> float:
    """``H_B(y)`` with ``0 log 0 = 0``; defined on the closed polytope."""
    y = check_domain(g, y, interior=False)
    d = g.degrees
    one_minus = 1.0 - y
    node = (d - 1) * xlogy(one_minus, one_minus) - xlogy(y, y)
    slack = 1.0 - y[g.edge_u] - y[g.edge_v]
    return float(node.sum() - xlogy(slack, slack).sum())


def bethe_free_energy(g: InterferenceGraph, y, r) -> float:
    r = np.asarray(r, dtype=float)
    h = bethe_entropy(g, y)
    return float(-np.dot(np.asarray(y, dtype=float), r) - h)


def bethe_entropy_gradient(g: InterferenceGraph, y) -> np.ndarray:
    """``dH_B/dy_i = -(d_i-1) log(1-y_i) - log y_i + sum_j log(1-y_i-y_j)``."""
    y = check_domain(g, y, interior=True)
    grad = -(g.degrees - 1) * np.log1p(-y) - np.log(y)
    if g.num_edges:
        ls = np.log(1.0 - y[g.edge_u] - y[g.edge_v])
        grad += np.bincount(g.edge_u, ls, g.n) + np.bincount(g.edge_v, ls, g.n)
    return grad


def bethe_gradient(g: InterferenceGraph, y, r) -> np.ndarray:
    """Gradient of ``F_B(.; r)`` at an interior point."""
    r = np.asarray(r, dtype=float)
    return -r - bethe_entropy_gradient(g, y)


@dataclass(frozen=True)
class BetheErrorReport:
    target: np.ndarray
    intensity: np.ndarray
    service: np.ndarray
    errors: np.ndarray

    @property
    def e_max(self) -> float:
        return float(self.errors.max())

    @property
    def normalized(self) -> np.ndarray:
        return self.errors / self.target

    @property
    def normalized_max(self) -> float:
        return float(self.normalized.max())


def bethe_error_at(g: InterferenceGraph, lam, schedules=None) -> BetheErrorReport:
    """Gap between target rates and the exact rates under their BAS intensities.

    ``lam`` is by construction a stationary point of ``F_B(.; BAS(lam))``,
    so this is the Bethe error evaluated at that point.
    """
    from .bas import bas_intensity
    from .oracle import service_rates

    lam = check_domain(g, lam, interior=True)
    r = bas_intensity(g, lam)
    s = service_rates(g, r, schedules)
    return BetheErrorReport(lam, r, s, np.abs(lam - s))
