"""Reusable experiment drivers behind the command line."""
from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bum import ConcavityWarning, ProjectionSchedule, UtilitySpec, bum_recover_intensity, bum_run, k_b_optimum
from .bethe import bethe_error_at
from .graph import InterferenceGraph, enumerate_feasible_schedules, enumeration_cap, symmetric_capacity
from .oracle import service_rates
from .sim import run_baseline, simulate

SWEEP_HEADER = ["topology", "n", "load", "e_max", "normalized_e_max"]


def _sweep_point(args):
    g, load, cap, schedules = args
    lam = np.full(g.n, load * cap)
    rep = bethe_error_at(g, lam, schedules)
    return [g.name, g.n, float(load), rep.e_max, rep.normalized_max]


def bethe_error_sweep(g: InterferenceGraph, loads, workers: int = 1) -> list[list]:
    """Rows ``(topology, n, load, e_max, normalized_e_max)`` for symmetric targets.

    Load ``L`` maps to ``lambda_i = L * symmetric_capacity(g)``.
    """
    schedules = enumerate_feasible_schedules(g)
    cap = symmetric_capacity(g, schedules)
    jobs = [(g, float(L), cap, schedules) for L in loads]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, jobs))
    return [_sweep_point(j) for j in jobs]


@dataclass
class UtilityEvaluation:
    utility: float
    rates: np.ndarray
    method: str  # "oracle" or "simulation"


def achieved_utility(g: InterferenceGraph, r, u: UtilitySpec, *, duration: float = 1e6,
                     seed=0) -> UtilityEvaluation:
    """``sum_i U(s_i(r))`` from the exact oracle, or a long simulation beyond the cap."""
    if g.n <= enumeration_cap():
        s = service_rates(g, r)
        return UtilityEvaluation(u.total(s), s, "oracle")
    s = simulate(g, r, duration, seed).rates
    return UtilityEvaluation(u.total(np.maximum(s, 1e-300)), s, "simulation")


@dataclass
class CompareResult:
    bum_trace: object
    baselines: dict
    summary: list[dict]


def utility_compare(g: InterferenceGraph, u: UtilitySpec, *, sched: ProjectionSchedule | None = None,
                    horizon: int = 1000, kinds=("jw", "ejw", "ssca"), frames: int = 1000,
                    frame_len: float = 100.0, jw_base: float = 100.0, r0: float = 1.0,
                    r_bounds=(-20.0, 20.0), duration: float = 1e6, seed: int = 0) -> CompareResult:
    """Run BUM and the baseline controllers; evaluate each on its final intensity."""
    sched = ProjectionSchedule.default() if sched is None else sched
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConcavityWarning)
        trace = bum_run(g, u, sched, horizon)
    reference = None
    try:
        y_star, _ = k_b_optimum(g, u)
        reference = u.total(y_star)
    except Exception:  # pragma: no cover - optimum is diagnostic only
        reference = None
    rows = []
    r_bum = bum_recover_intensity(g, trace.final_y)
    ev = achieved_utility(g, r_bum, u, duration=duration, seed=seed)
    rows.append(dict(algorithm="bum", updates=horizon, utility=ev.utility, method=ev.method,
                     bethe_utility=u.total(trace.final_y), reference=reference))
    runs = {}
    for k, kind in enumerate(kinds):
        c = run_baseline(g, kind, u, frames, frame_len=frame_len, jw_base=jw_base,
                         seed=seed + 1 + k, r0=r0, r_bounds=r_bounds)
        runs[kind] = c
        ev = achieved_utility(g, c.final_r, u, duration=duration, seed=seed)
        rows.append(dict(algorithm=kind, updates=frames, utility=ev.utility, method=ev.method,
                         bethe_utility=float("nan"), reference=reference))
    return CompareResult(trace, runs, rows)
