"""Continuous-time CSMA simulation and the MCMC-style baseline controllers.

The schedule process is simulated event by event: the superposition of the
``n`` unit-rate Poisson clocks ticks after an ``Exp(n)`` wait, the ticking
link is uniform, and it activates with probability ``sigmoid(r_i)`` if no
neighbour is active.  Random numbers are drawn from a seeded
``numpy.random.Generator`` in fixed-size chunks and consumed by a compiled
kernel, so a seed fixes the whole event sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.special import expit

from ._csv import csv_writer, fmt, open_out
from .bum import UtilitySpec
from .graph import InterferenceGraph, enumerate_feasible_schedules
from .oracle import stationary_distribution

CHUNK = 1 << 18
OCCUPANCY_MAX_LINKS = 20
R_BOUNDS = (-20.0, 20.0)
INVERSION_FLOOR = 1e-6


@numba.njit(cache=True)
def _advance(state, clock, on_since, busy, occ, nbr, p_on, until, unif, n, track_occ, check):
    """Consume events from ``unif`` (pairs of uniforms) until ``until`` or exhaustion.

    Returns ``(state, clock, used, done)``.
    """
    m = unif.shape[0] // 2
    used = 0
    for k in range(m):
        u_wait = unif[2 * k]
        u_pick = unif[2 * k + 1]
        t_next = clock - math.log1p(-u_wait) / n
        used += 1
        if t_next >= until:
            if track_occ:
                occ[state] += until - clock
            return state, until, used, True
        if track_occ:
            occ[state] += t_next - clock
        clock = t_next
        x = u_pick * n
        i = int(x)
        if i >= n:
            i = n - 1
        coin = x - i
        bit = np.int64(1) << np.int64(i)
        was_on = (state & bit) != 0
        if (state & nbr[i]) != 0:
            now_on = False
        else:
            now_on = coin < p_on[i]
        if now_on and not was_on:
            state |= bit
            on_since[i] = clock
        elif was_on and not now_on:
            state &= ~bit
            busy[i] += clock - on_since[i]
        if check:
            for j in range(n):
                if (state >> j) & 1 and (state & nbr[j]) != 0:
                    return state, clock, -1, True
    return state, clock, used, False


@dataclass
class SimState:
    """Mutable simulator state; ``sigma`` is a bitmask of active links."""

    graph: InterferenceGraph
    rng: np.random.Generator
    sigma: int = 0
    clock: float = 0.0
    busy_time: np.ndarray = field(default=None)
    events: int = 0

    def __post_init__(self):
        if self.busy_time is None:
            self.busy_time = np.zeros(self.graph.n)
        self._nbr = self.graph.neighbor_masks()

    @classmethod
    def fresh(cls, g: InterferenceGraph, seed) -> "SimState":
        return cls(g, np.random.default_rng(seed))

    def schedule(self) -> np.ndarray:
        return np.array([(self.sigma >> i) & 1 for i in range(self.graph.n)], dtype=np.int8)

    def run(self, r, duration: float, occupancy: np.ndarray | None = None, check: bool = False) -> np.ndarray:
        """Advance by ``duration`` clock units under intensities ``r``.

        Returns the busy time of each link accumulated during this call.
        """
        if not duration > 0:
            raise ValueError(f"duration must be > 0, got {duration}")
        n = self.graph.n
        p_on = expit(np.asarray(r, dtype=float))
        until = self.clock + duration
        on_since = np.full(n, self.clock)
        busy = np.zeros(n)
        track = occupancy is not None
        occ = occupancy if track else np.zeros(1)
        state = np.int64(self.sigma)
        clock = self.clock
        # chunk sized to the expected event count; leftover draws are discarded
        size = min(CHUNK, int(1.1 * n * duration) + 64)
        done = False
        while not done:
            unif = self.rng.random(2 * size)
            state, clock, used, done = _advance(
                state, clock, on_since, busy, occ, self._nbr, p_on, until, unif, n, track, check
            )
            if used < 0:
                from .errors import InvariantViolation
                raise InvariantViolation(f"infeasible schedule {int(state):b} at t={clock}")
            self.events += used
        for i in range(n):
            if (int(state) >> i) & 1:
                busy[i] += until - on_since[i]
        self.sigma = int(state)
        self.clock = until
        self.busy_time += busy
        return busy


@dataclass
class SimTrace:
    rates: np.ndarray
    duration: float
    events: int
    final_schedule: np.ndarray
    occupancy: np.ndarray | None = None  # time fraction per bitmask state, if tracked


def simulate(g: InterferenceGraph, r, duration: float, seed=0, *, occupancy: bool = False,
             check: bool = False) -> SimTrace:
    """Simulate from the idle schedule for ``duration`` clock units.

    ``rates`` are time-weighted fractions of time each link was active.
    With ``occupancy=True`` (``n <= 20``) the time spent in every bitmask
    state is returned as well, normalised by ``duration``.
    """
    if not duration > 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    st = SimState.fresh(g, seed)
    occ = None
    if occupancy:
        if g.n > OCCUPANCY_MAX_LINKS:
            raise ValueError(f"occupancy tracking needs n <= {OCCUPANCY_MAX_LINKS}")
        occ = np.zeros(1 << g.n)
    busy = st.run(r, duration, occ, check=check)
    return SimTrace(busy / duration, float(duration), st.events, st.schedule(),
                    None if occ is None else occ / duration)


# ---------------------------------------------------------------------------
# validation against the oracle


def asymptotic_variance(g: InterferenceGraph, r) -> np.ndarray:
    """Per-link asymptotic variance of the time-average of ``sigma_i``.

    ``Var(avg over [0, D]) ~ v_i / D`` with ``v_i = 2 <f, A f>_pi`` where
    ``A`` is the inverse of ``-Q`` on mean-zero functions (Poisson equation
    for the CSMA generator ``Q``).
    """
    dist = stationary_distribution(g, r)
    return _poisson_variance(g, r, dist, [dist.schedules.active(i).astype(float) for i in range(g.n)])


def occupancy_variance(g: InterferenceGraph, r) -> np.ndarray:
    """Asymptotic variance of the time fraction spent in each schedule."""
    dist = stationary_distribution(g, r)
    m = len(dist.schedules)
    return _poisson_variance(g, r, dist, list(np.eye(m)))


def _poisson_variance(g, r, dist, funcs):
    masks = dist.schedules.masks
    m = len(masks)
    pos = {int(s): k for k, s in enumerate(masks)}
    nbr = g.neighbor_masks()
    p_on = expit(np.asarray(r, dtype=float))
    Q = np.zeros((m, m))
    for k, s in enumerate(masks):
        s = int(s)
        for i in range(g.n):
            bit = 1 << i
            if s & bit:
                Q[k, pos[s & ~bit]] += 1.0 - p_on[i]
            elif not s & int(nbr[i]):
                Q[k, pos[s | bit]] += p_on[i]
        Q[k, k] = -Q[k].sum()
    pi = dist.probabilities
    # solve -Q h = f - pi.f with pi.h = 0 via the bordered system
    A = np.zeros((m + 1, m + 1))
    A[:m, :m] = -Q
    A[:m, m] = 1.0
    A[m, :m] = pi
    out = []
    for f in funcs:
        fc = f - pi @ f
        h = np.linalg.solve(A, np.append(fc, 0.0))[:m]
        out.append(2.0 * float(pi @ (fc * h)))
    return np.array(out)


@dataclass
class OracleComparison:
    estimate: np.ndarray
    exact: np.ndarray
    deviation: np.ndarray
    sigma: np.ndarray
    effective_samples: np.ndarray
    within_band: np.ndarray

    @property
    def max_deviation(self) -> float:
        return float(self.deviation.max())

    @property
    def all_within(self) -> bool:
        return bool(self.within_band.all())


def estimate_vs_oracle(g: InterferenceGraph, r, duration: float, seed=0, bands: float = 3.0) -> OracleComparison:
    """Compare simulated rates with exact ones, using 3-sigma bands.

    The band width comes from the exact asymptotic variance of the time
    average; ``effective_samples`` is the binomial-equivalent count
    ``s(1-s) / sigma^2``.
    """
    if not duration > 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    tr = simulate(g, r, duration, seed)
    s = stationary_distribution(g, r).marginals()
    sig = np.sqrt(asymptotic_variance(g, r) / duration)
    dev = np.abs(tr.rates - s)
    n_eff = s * (1 - s) / np.maximum(sig ** 2, 1e-300)
    return OracleComparison(tr.rates, s, dev, sig, n_eff, dev <= bands * sig)


# ---------------------------------------------------------------------------
# baseline controllers

BASELINES = ("fixed", "jw", "ejw", "ssca")


@dataclass
class ControllerTrace:
    """One row per frame: the intensities used, time, and empirical rates."""

    kind: str
    graph: InterferenceGraph
    utility: UtilitySpec
    r: np.ndarray  # (frames + 1, n); row t is the intensity for frame t+1, last row final
    s_hat: np.ndarray  # (frames, n)
    sim_time: np.ndarray  # (frames,), clock at end of each frame
    utility_so_far: np.ndarray  # (frames,)
    settings: dict

    @property
    def final_r(self) -> np.ndarray:
        return self.r[-1]

    @property
    def frames(self) -> int:
        return len(self.s_hat)


def jw_frame_length(t: int, base: float = 100.0) -> float:
    return base * (1 + t)


def run_baseline(
    g: InterferenceGraph,
    kind: str,
    u: UtilitySpec | None = None,
    frames: int = 1000,
    *,
    frame_len: float = 100.0,
    jw_base: float = 100.0,
    seed=0,
    r0=1.0,
    r_bounds: tuple[float, float] = R_BOUNDS,
) -> ControllerTrace:
    """Alternate simulation frames with intensity updates.

    ``jw``: ``r += (1/t) (U'^-1(r/beta) - s_hat)`` with frame ``t`` lasting
    ``jw_base * (1 + t)``.  ``ejw``: the same update with fixed frames.
    ``ssca``: ``r = beta U'(running mean of s_hat)``.  ``fixed`` never
    updates.  Inputs to ``U'^-1`` and ``U'`` are floored at 1e-6 and all
    intensities are clamped to ``r_bounds``.
    """
    kind = kind.lower()
    if kind not in BASELINES:
        raise ValueError(f"unknown controller {kind!r}; expected one of {BASELINES}")
    if frames < 1:
        raise ValueError(f"frames must be >= 1, got {frames}")
    u = UtilitySpec() if u is None else u
    lo, hi = r_bounds
    n = g.n
    r = np.clip(np.broadcast_to(np.asarray(r0, dtype=float), (n,)).copy(), lo, hi)
    st = SimState.fresh(g, seed)
    R = np.empty((frames + 1, n))
    S = np.empty((frames, n))
    times = np.empty(frames)
    util = np.empty(frames)
    running = np.zeros(n)
    for t in range(1, frames + 1):
        R[t - 1] = r
        length = jw_frame_length(t, jw_base) if kind == "jw" else frame_len
        s_hat = st.run(r, length) / length
        S[t - 1] = s_hat
        times[t - 1] = st.clock
        running += (s_hat - running) / t
        util[t - 1] = u.total(np.maximum(st.busy_time / st.clock, INVERSION_FLOOR))
        if kind in ("jw", "ejw"):
            target = u.dU_inv(np.maximum(r / u.beta, INVERSION_FLOOR))
            r = r + (target - s_hat) / t
        elif kind == "ssca":
            r = u.beta * u.dU(np.maximum(running, INVERSION_FLOOR))
        r = np.clip(r, lo, hi)
    R[frames] = r
    settings = dict(kind=kind, frames=frames, frame_len=frame_len, jw_base=jw_base,
                    seed=seed, r0=float(np.mean(r0)), r_min=lo, r_max=hi)
    return ControllerTrace(kind, g, u, R, S, times, util, settings)


def ssca_running_mean(trace: ControllerTrace, t: int) -> np.ndarray:
    """``(1/t) sum_{j<=t} s_hat(j)``, the quantity SSCA feeds to ``U'``."""
    return trace.s_hat[:t].sum(axis=0) / t


def baseline_header(n: int) -> list[str]:
    return (["update_index", "sim_time"] + [f"r_{i}" for i in range(n)]
            + [f"s_hat_{i}" for i in range(n)] + ["utility_so_far"])


def write_baseline_csv(trace: ControllerTrace, path) -> None:
    """Columns ``update_index, sim_time, r_i..., s_hat_i..., utility_so_far``."""
    with open_out(path) as fh:
        w = csv_writer(fh)
        w.writerow(baseline_header(trace.graph.n))
        for t in range(trace.frames):
            w.writerow([t + 1, fmt(trace.sim_time[t])]
                       + [fmt(v) for v in trace.r[t]]
                       + [fmt(v) for v in trace.s_hat[t]]
                       + [fmt(trace.utility_so_far[t])])


def schedule_occupancy_from_oracle(g: InterferenceGraph, r) -> dict[int, float]:
    dist = stationary_distribution(g, r, enumerate_feasible_schedules(g))
    return {int(m): float(p) for m, p in zip(dist.schedules.masks, dist.probabilities)}
