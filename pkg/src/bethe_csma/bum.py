"""Utility maximisation through the Bethe entropy.

Phase one maximises ``K_B(y) = beta * sum_i U(y_i) + H_B(y)`` over the
marginal polytope by gradient ascent with step ``1/sqrt(t)`` and a
time-varying clamp that keeps iterates strictly inside; phase two turns the
rates into CSMA intensities with the same closed form as BAS.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from ._csv import csv_writer, fmt, open_out
from .bas import bas_intensity
from .bethe import bethe_entropy, bethe_entropy_gradient, check_domain
from .errors import DomainError, InvariantViolation
from .graph import InterferenceGraph
from .numdiff import central_jacobian, max_relative_error

K_B_FLOOR = 1e-300


class ConcavityWarning(RuntimeWarning):
    """``beta <= 2d/alpha``: ``K_B`` is not guaranteed concave."""


@dataclass(frozen=True)
class UtilitySpec:
    """alpha-fair utility ``U`` scaled by ``beta`` inside ``K_B``."""

    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")

    def U(self, x):
        x = np.asarray(x, dtype=float)
        if self.alpha == 1.0:
            return np.log(x)
        return x ** (1.0 - self.alpha) / (1.0 - self.alpha)

    def dU(self, x):
        return np.asarray(x, dtype=float) ** (-self.alpha)

    def d2U(self, x):
        x = np.asarray(x, dtype=float)
        return -self.alpha * x ** (-self.alpha - 1.0)

    def dU_inv(self, z):
        """Inverse marginal utility, ``z ** (-1/alpha)``."""
        if self.alpha == 0:
            raise ValueError("U' is constant for alpha = 0 and has no inverse")
        return np.asarray(z, dtype=float) ** (-1.0 / self.alpha)

    def total(self, x) -> float:
        return float(np.sum(self.U(x)))

    def concavity_threshold(self, g: InterferenceGraph) -> float:
        return math.inf if self.alpha == 0 else 2.0 * g.max_degree / self.alpha

    def in_concave_regime(self, g: InterferenceGraph) -> bool:
        return self.beta >= self.concavity_threshold(g)


@dataclass(frozen=True)
class ProjectionSchedule:
    """Lower clamp ``c1(t)`` and edge-slack reserve ``c2(t)``; both must vanish."""

    c1: Callable[[float], float]
    c2: Callable[[float], float]
    description: str = "custom"

    @classmethod
    def default(cls, c1_scale: float = 100.0, c2_scale: float = 5.0, c2_exponent: float = 0.25):
        """``c1 = 1/(c1_scale log(t+e))``, ``c2 = 1/(c2_scale t^c2_exponent)``."""
        def c1(t):
            return 1.0 / (c1_scale * math.log(t + math.e))

        def c2(t):
            return 1.0 / (c2_scale * t ** c2_exponent)

        desc = f"c1=1/({c1_scale:g}*log(t+e)); c2=1/({c2_scale:g}*t^{c2_exponent:g})"
        return cls(c1, c2, desc)

    def rate_condition(self, t, alpha: float) -> np.ndarray:
        """``(c1^-alpha - log(c1 c2)) / (sqrt(t) min(c1, c2))``; should tend to 0."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        a = np.array([self.c1(s) for s in t])
        b = np.array([self.c2(s) for s in t])
        return (a ** (-alpha) - np.log(a * b)) / (np.sqrt(t) * np.minimum(a, b))


# ---------------------------------------------------------------------------
# objective and derivatives


def _interior(g, y):
    y = check_domain(g, y, interior=True)
    if np.any(y < K_B_FLOOR):
        i = int(np.argmin(y))
        raise DomainError(f"link {i}: y_{i}={float(y[i])!r} below {K_B_FLOOR:g}, utility diverges")
    return y


def k_b(g: InterferenceGraph, y, u: UtilitySpec) -> float:
    y = _interior(g, y)
    return u.beta * u.total(y) + bethe_entropy(g, y)


def grad_k_b(g: InterferenceGraph, y, u: UtilitySpec) -> np.ndarray:
    """``beta U'(y_i) - (d_i-1) log(1-y_i) - log y_i + sum_j log(1-y_i-y_j)``."""
    y = _interior(g, y)
    return u.beta * u.dU(y) + bethe_entropy_gradient(g, y)


def hessian_k_b(g: InterferenceGraph, y, u: UtilitySpec) -> np.ndarray:
    y = _interior(g, y)
    n = g.n
    H = np.zeros((n, n))
    inv_slack = 1.0 / (1.0 - y[g.edge_u] - y[g.edge_v])
    diag = u.beta * u.d2U(y) + (g.degrees - 1) / (1.0 - y) - 1.0 / y
    diag -= np.bincount(g.edge_u, inv_slack, n) + np.bincount(g.edge_v, inv_slack, n)
    H[np.diag_indices(n)] = diag
    H[g.edge_u, g.edge_v] = -inv_slack
    H[g.edge_v, g.edge_u] = -inv_slack
    return H


def project_star(x: float, y_i: float, neighbor_max: float, c1: float, c2: float) -> float:
    """Time-varying clamp of a proposed ``y_i``.

    Upper bound ``1 - kappa`` with ``kappa = (1 - y_i + neighbor_max + c2)/2``;
    when ``c1`` exceeds it the lower clamp wins.
    """
    upper = 1.0 - (1.0 - y_i + neighbor_max + c2) / 2.0
    if x < c1:
        return c1
    if x > upper:
        return max(upper, c1)
    return x


def _neighbor_max(y, idx, valid):
    return np.where(valid, y[idx], 0.0).max(axis=1)


# ---------------------------------------------------------------------------
# the iteration

HIT_LOWER = 1
HIT_UPPER = 2
HIT_CONFLICT = 4


@dataclass
class BumTrace:
    """Iterates ``y(t)``, intensities ``r(t)`` and ``K_B(y(t))`` for ``t = 1..T``.

    ``hits[t-1, i]`` holds the clamp flags applied when ``y_i(t)`` was
    produced (zero at ``t = 1``), as a combination of ``HIT_LOWER``,
    ``HIT_UPPER`` and ``HIT_CONFLICT``.
    """

    graph: InterferenceGraph
    utility: UtilitySpec
    schedule_description: str
    y: np.ndarray
    r: np.ndarray
    k: np.ndarray
    hits: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    step: np.ndarray = field(repr=False)

    @property
    def T(self) -> int:
        return len(self.k)

    @property
    def final_y(self) -> np.ndarray:
        return self.y[-1]

    @property
    def final_r(self) -> np.ndarray:
        return self.r[-1]

    @property
    def best_index(self) -> int:
        return int(np.argmax(self.k))

    @property
    def best_y(self) -> np.ndarray:
        return self.y[self.best_index]

    def hit_masks(self) -> np.ndarray:
        """Per-iteration integer bitmask of links where any clamp fired."""
        w = np.int64(1) << np.arange(self.graph.n, dtype=np.int64)
        return ((self.hits != 0).astype(np.int64) * w).sum(axis=1)

    def mu_gap(self, k_ref: float, T: int | None = None) -> float:
        """``sum_t mu(t) (k_ref - K_B(y(t)))`` over the first ``T`` iterations."""
        T = self.T if T is None else T
        if not 1 <= T <= self.T:
            raise ValueError(f"horizon {T} outside recorded range 1..{self.T}")
        return float(mu_weights(T) @ (k_ref - self.k[:T]))

    def sample_iterate(self, rng: np.random.Generator, T: int | None = None) -> np.ndarray:
        T = self.T if T is None else T
        return self.y[rng.choice(T, p=mu_weights(T))]


def mu_weights(T: int) -> np.ndarray:
    """``mu(t) ∝ t^(-1/2)`` on ``{1..T}``."""
    w = 1.0 / np.sqrt(np.arange(1, T + 1, dtype=float))
    return w / w.sum()


def bum_run(
    g: InterferenceGraph,
    u: UtilitySpec | None = None,
    sched: ProjectionSchedule | None = None,
    T: int = 1000,
    y0=None,
) -> BumTrace:
    """Run ``T`` iterates of synchronous projected gradient ascent on ``K_B``.

    All links read the time-``t`` snapshot for both the gradient and the
    clamp bound.  The intensity recorded at each step is BAS applied to
    ``y(t)``.
    """
    u = UtilitySpec() if u is None else u
    sched = ProjectionSchedule.default() if sched is None else sched
    if T < 1:
        raise ValueError(f"horizon T must be >= 1, got {T}")
    if not u.in_concave_regime(g):
        warnings.warn(
            f"beta={u.beta:g} <= 2d/alpha={u.concavity_threshold(g):g}: "
            "K_B may not be concave, convergence guarantee does not apply",
            ConcavityWarning,
            stacklevel=2,
        )
    n = g.n
    idx, valid = g.padded_neighbors()
    y = np.full(n, 0.25) if y0 is None else np.array(y0, dtype=float)
    check_domain(g, y, interior=True)

    Y = np.empty((T, n))
    R = np.empty((T, n))
    K = np.empty(T)
    hits = np.zeros((T, n), dtype=np.int8)
    c1s = np.empty(T)
    c2s = np.empty(T)
    steps = np.empty((T, n))
    floor = math.inf
    for t in range(1, T + 1):
        row = t - 1
        Y[row] = y
        R[row] = bas_intensity(g, y)
        K[row] = k_b(g, y, u)
        c1, c2 = sched.c1(t), sched.c2(t)
        c1s[row], c2s[row] = c1, c2
        floor = min(floor, c1)
        grad = grad_k_b(g, y, u)
        steps[row] = grad / math.sqrt(t)
        if t == T:
            break
        x = y + steps[row]
        upper = (1.0 + y - _neighbor_max(y, idx, valid) - c2) / 2.0
        new = np.maximum(np.minimum(x, upper), c1)
        flags = np.zeros(n, dtype=np.int8)
        flags[x < c1] |= HIT_LOWER
        flags[x > upper] |= HIT_UPPER
        flags[c1 > upper] |= HIT_CONFLICT
        hits[row + 1] = flags
        _check_iterate(g, new, floor * (1 - 1e-12), t + 1)
        y = new
    return BumTrace(g, u, sched.description, Y, R, K, hits, c1s, c2s, steps)


def _check_iterate(g, y, floor, t):
    if np.any(y < floor):
        i = int(np.argmin(y))
        raise InvariantViolation(f"iterate t={t}: y_{i}={float(y[i])!r} fell below clamp floor {floor!r}")
    if g.num_edges:
        s = y[g.edge_u] + y[g.edge_v]
        k = int(np.argmax(s))
        if s[k] >= 1.0:
            i, j = g.edges[k]
            raise InvariantViolation(f"iterate t={t}: y_{i}+y_{j}={float(s[k])!r} left the polytope")
    if np.any(y >= 1.0):
        raise InvariantViolation(f"iterate t={t}: a rate reached 1")


def bum_recover_intensity(g: InterferenceGraph, y_final) -> np.ndarray:
    """Deployable CSMA intensities for the rates found by the ascent."""
    return bas_intensity(g, y_final)


# ---------------------------------------------------------------------------
# reference optimum


def k_b_optimum(g: InterferenceGraph, u: UtilitySpec, tol: float = 1e-24, max_iter: int = 500):
    """Maximiser of ``K_B`` by damped Newton ascent started from a BUM warm start.

    Falls back to a gradient step whenever the Hessian is not negative
    definite, and backtracks to stay strictly inside the polytope.
    Returns ``(y_star, K_B(y_star))``.
    """
    return _k_b_optimum_cached(g.n, g.edges, u.alpha, u.beta, tol, max_iter)


@lru_cache(maxsize=64)
def _k_b_optimum_cached(n, edges, alpha, beta, tol, max_iter):
    g = InterferenceGraph(n, edges)
    u = UtilitySpec(alpha, beta)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConcavityWarning)
        y = bum_run(g, u, T=2000).best_y.copy()
    f = k_b(g, y, u)
    for _ in range(max_iter):
        grad = grad_k_b(g, y, u)
        H = hessian_k_b(g, y, u)
        try:
            np.linalg.cholesky(-H)
            direction = np.linalg.solve(-H, grad)
        except np.linalg.LinAlgError:
            direction = grad
        dec = float(grad @ direction)
        if dec < tol:
            break
        step = 1.0
        while step > 1e-16:
            cand = y + step * direction
            if _strict_interior(g, cand):
                fc = k_b(g, cand, u)
                if fc >= f:
                    break
            step *= 0.5
        else:
            break
        if fc - f < 1e-16 and step < 1e-8:
            break
        y, f = cand, fc
    y.setflags(write=False)
    return y, f


def _strict_interior(g, y):
    if np.any(y <= 0) or np.any(y >= 1):
        return False
    return not g.num_edges or bool(np.all(y[g.edge_u] + y[g.edge_v] < 1))


# ---------------------------------------------------------------------------
# diagnostics


def random_interior_points(g: InterferenceGraph, count: int, rng: np.random.Generator) -> np.ndarray:
    """Random points strictly inside the polytope, spread over its bulk."""
    pts = np.empty((count, g.n))
    for k in range(count):
        z = rng.uniform(0.0, 1.0, g.n)
        worst = z.max()
        if g.num_edges:
            worst = max(worst, (z[g.edge_u] + z[g.edge_v]).max())
        pts[k] = z * rng.uniform(0.02, 0.98) / worst
    return pts


@dataclass
class HessianReport:
    points: int
    max_eigenvalue: float
    max_fd_error: float
    concave_regime: bool
    worst_point: np.ndarray
    eig_tol: float = 1e-9
    fd_tol: float = 1e-4

    @property
    def eigen_ok(self) -> bool:
        return self.max_eigenvalue <= self.eig_tol

    @property
    def fd_ok(self) -> bool:
        return self.max_fd_error <= self.fd_tol

    @property
    def passed(self) -> bool:
        # below the concavity threshold the eigenvalue is report-only
        return self.fd_ok and (self.eigen_ok or not self.concave_regime)


def hessian_check_k_b(
    g: InterferenceGraph,
    u: UtilitySpec,
    points: int = 200,
    seed: int = 0,
    *,
    gradient=None,
    fd_step: float = 1e-7,
) -> HessianReport:
    """Analytic Hessian of ``K_B`` at random interior points.

    Records the largest eigenvalue and the largest relative deviation from
    central differences of ``gradient`` (default :func:`grad_k_b`).  The
    eigenvalue bound is only binding when ``beta >= 2d/alpha``.
    """
    gradient = grad_k_b if gradient is None else gradient
    rng = np.random.default_rng(seed)
    pts = random_interior_points(g, points, rng)
    max_eig = -np.inf
    max_fd = 0.0
    worst = pts[0]
    for y in pts:
        H = hessian_k_b(g, y, u)
        eig = float(np.linalg.eigvalsh(H).max())
        if eig > max_eig:
            max_eig, worst = eig, y
        h = fd_step * min(y.min(), (1.0 - y).min(),
                          (1.0 - y[g.edge_u] - y[g.edge_v]).min() if g.num_edges else 1.0)
        fd = central_jacobian(lambda v: gradient(g, v, u), y, step=h)
        max_fd = max(max_fd, max_relative_error(fd, H, floor=1e-3 * np.abs(H).max()))
    return HessianReport(points, max_eig, max_fd, u.in_concave_regime(g), worst)


@dataclass
class InteriorReport:
    all_interior: bool
    last_clamp_t: int
    step_crossover_t: int | None
    surrogate_t_star: int | None
    min_rate: float
    min_edge_slack: float
    min_upper_headroom: float
    conflicts: int
    rate_condition_final: float


def lemma2_diagnostics(trace: BumTrace, g: InterferenceGraph | None = None,
                       u: UtilitySpec | None = None, sched: ProjectionSchedule | None = None) -> InteriorReport:
    """Empirical stand-ins for the entry time into the clamp-free regime.

    ``last_clamp_t`` is the last iteration at which any clamp fired (0 if
    none); ``step_crossover_t`` is the first ``t`` after which every step
    stays below ``min(c1, c2)/2``; their maximum is the surrogate ``t*``.
    The three minimum margins stand in for the distance constants.
    """
    g = trace.graph if g is None else g
    u = trace.utility if u is None else u
    Y = trace.y
    fired = np.flatnonzero((trace.hits != 0).any(axis=1))
    last_clamp = int(fired[-1] + 1) if fired.size else 0
    thr = 0.5 * np.minimum(trace.c1, trace.c2)
    ok = (np.abs(trace.step).max(axis=1) < thr)
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        crossover = 1
    elif bad[-1] + 1 < trace.T:
        crossover = int(bad[-1] + 2)
    else:
        crossover = None
    t_star = None if crossover is None else max(crossover, last_clamp)
    idx, valid = g.padded_neighbors()
    headroom = np.inf
    slack = np.inf
    for t in range(trace.T):
        y = Y[t]
        up = (1.0 + y - _neighbor_max(y, idx, valid) - trace.c2[t]) / 2.0
        headroom = min(headroom, float((up - y).min()))
        if g.num_edges:
            slack = min(slack, float((1.0 - y[g.edge_u] - y[g.edge_v]).min()))
    interior = bool(np.all(Y > 0) and np.all(Y < 1) and slack > 0)
    rc = sched.rate_condition(trace.T, u.alpha)[0] if sched is not None else float("nan")
    return InteriorReport(
        all_interior=interior,
        last_clamp_t=last_clamp,
        step_crossover_t=crossover,
        surrogate_t_star=t_star,
        min_rate=float(Y.min()),
        min_edge_slack=float(slack),
        min_upper_headroom=float(headroom),
        conflicts=int(np.count_nonzero(trace.hits & HIT_CONFLICT)),
        rate_condition_final=float(rc),
    )


def utility_gap_bound(errors_max: float, service, u: UtilitySpec, n: int) -> float:
    """Right-hand side of the utility-gap bound: ``sum_i e_B / s_i^alpha + n log 2 / beta``."""
    service = np.asarray(service, dtype=float)
    return float(np.sum(errors_max / service ** u.alpha) + n * math.log(2) / u.beta)


# ---------------------------------------------------------------------------
# CSV export


def trace_header(n: int) -> list[str]:
    return ["t", "K_B"] + [f"y_{i}" for i in range(n)] + [f"r_{i}" for i in range(n)] + ["hit_mask"]


def write_trace_csv(trace: BumTrace, path) -> None:
    """Columns ``t, K_B, y_0..y_{n-1}, r_0..r_{n-1}, hit_mask``."""
    masks = trace.hit_masks()
    with open_out(path) as fh:
        w = csv_writer(fh)
        w.writerow(trace_header(trace.graph.n))
        for t in range(trace.T):
            w.writerow(
                [t + 1, fmt(trace.k[t])]
                + [fmt(v) for v in trace.y[t]]
                + [fmt(v) for v in trace.r[t]]
                + [int(masks[t])]
            )
