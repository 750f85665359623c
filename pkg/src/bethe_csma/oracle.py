"""Exact CSMA stationary law by brute-force enumeration.

Everything here is ground truth for small graphs: the product-form
distribution over independent sets, its marginals (service rates) and the
Gibbs free energy.  All partition sums are done in log space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .graph import InterferenceGraph, ScheduleSet, enumerate_feasible_schedules


@dataclass(frozen=True)
class ScheduleDistribution:
    """Probabilities aligned with ``schedules.masks``.

    ``log_partition`` is ``log Z`` when the distribution came from
    :func:`stationary_distribution`, and ``nan`` for arbitrary ones.
    """

    schedules: ScheduleSet
    probabilities: np.ndarray
    log_partition: float = float("nan")

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != (len(self.schedules),):
            raise ValueError(
                f"expected {len(self.schedules)} probabilities, got shape {p.shape}"
            )
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "probabilities", p)

    def marginals(self) -> np.ndarray:
        s = self.schedules
        return np.array([self.probabilities[s.active(i)].sum() for i in range(s.n)])

    def entropy(self) -> float:
        p = self.probabilities[self.probabilities > 0]
        return float(-np.sum(p * np.log(p)))


def _as_intensity(g: InterferenceGraph, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (g.n,):
        raise ValueError(f"intensity vector must have length {g.n}, got shape {r.shape}")
    if not np.all(np.isfinite(r)):
        raise ValueError("intensity vector must be finite")
    return r


def stationary_distribution(
    g: InterferenceGraph, r, schedules: ScheduleSet | None = None
) -> ScheduleDistribution:
    """``pi_sigma ∝ exp(sum_i sigma_i r_i)`` over the independent sets of ``g``."""
    r = _as_intensity(g, r)
    s = enumerate_feasible_schedules(g) if schedules is None else schedules
    lw = s.weights(r)
    log_z = float(logsumexp(lw))
    p = np.exp(lw - log_z)
    p /= p.sum()
    return ScheduleDistribution(s, p, log_z)


def service_rates(g: InterferenceGraph, r, schedules: ScheduleSet | None = None) -> np.ndarray:
    """Exact long-run fraction of time each link is active under intensities ``r``."""
    return stationary_distribution(g, r, schedules).marginals()


def gibbs_free_energy(dist: ScheduleDistribution, r) -> float:
    """``-E[r . sigma] - H(nu)`` with the convention ``0 log 0 = 0``."""
    r = np.asarray(r, dtype=float)
    if r.shape != (dist.schedules.n,):
        raise ValueError(
            f"dimension mismatch: distribution over {dist.schedules.n} links, r has shape {r.shape}"
        )
    energy = -float(dist.probabilities @ dist.schedules.weights(r))
    return energy - dist.entropy()


@dataclass
class VariationalReport:
    trials: int
    violations: int
    min_excess: float
    identity_error: float
    first_violation: np.ndarray | None = None

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.identity_error <= 1e-10


def random_distribution(schedules: ScheduleSet, rng: np.random.Generator) -> ScheduleDistribution:
    """Normalised exponential weights: a Dirichlet(1,...,1) draw on the simplex interior."""
    w = rng.exponential(size=len(schedules))
    return ScheduleDistribution(schedules, w / w.sum())


def verify_gibbs_variational(
    g: InterferenceGraph, r, trials: int = 1000, seed: int = 0, tol: float = 1e-12
) -> VariationalReport:
    """Check that the stationary law minimises the Gibbs free energy.

    Draws ``trials`` random distributions on the schedule set and counts
    those whose free energy falls below ``F_G(pi)`` by more than ``tol``;
    also reports ``|F_G(pi) + log Z|``.
    """
    r = _as_intensity(g, r)
    pi = stationary_distribution(g, r)
    f_pi = gibbs_free_energy(pi, r)
    rng = np.random.default_rng(seed)
    violations = 0
    first = None
    min_excess = np.inf
    for _ in range(trials):
        nu = random_distribution(pi.schedules, rng)
        excess = gibbs_free_energy(nu, r) - f_pi
        min_excess = min(min_excess, excess)
        if excess < -tol:
            violations += 1
            if first is None:
                first = nu.probabilities
    return VariationalReport(trials, violations, float(min_excess), abs(f_pi + pi.log_partition), first)
