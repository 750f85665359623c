"""Invariant suite run by ``bethe-csma verify``.

Each check returns a :class:`CheckResult` with the measured quantity and
the tolerance it was held to.  Monte-Carlo checks use bands wide enough
that the verdict does not depend on the seed.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .bas import bas_intensity
from .bethe import bethe_free_energy, bethe_gradient
from .bum import ConcavityWarning, UtilitySpec, grad_k_b, hessian_check_k_b, k_b, random_interior_points
from .graph import InterferenceGraph, make_topology
from .numdiff import central_gradient, max_relative_error
from .oracle import service_rates, verify_gibbs_variational
from .sim import estimate_vs_oracle


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def random_test_graphs(count: int, rng: np.random.Generator, max_n: int = 12) -> list[InterferenceGraph]:
    """Mix of complete, ring, star, grid and random graphs with ``n <= max_n``."""
    kinds = ("complete", "ring", "star", "grid", "random")
    out = []
    for k in range(count):
        kind = kinds[k % len(kinds)]
        if kind == "grid":
            w = int(rng.integers(1, 4))
            h = int(rng.integers(1, max_n // w + 1))
            out.append(make_topology("grid", width=w, height=min(h, 4)))
        elif kind == "random":
            out.append(make_topology("random", int(rng.integers(2, max_n + 1)),
                                     p=float(rng.uniform(0.1, 0.6)), seed=int(rng.integers(2**32))))
        else:
            out.append(make_topology(kind, int(rng.integers(2, max_n + 1))))
    return out


def check_zero_gradient(seed: int = 0, pairs: int = 50, gradient=None) -> CheckResult:
    """BAS intensities make the target a stationary point of ``F_B``."""
    gradient = bethe_gradient if gradient is None else gradient
    rng = np.random.default_rng(seed)
    worst = 0.0
    for g in random_test_graphs(pairs, rng):
        lam = random_interior_points(g, 1, rng)[0]
        worst = max(worst, float(np.abs(gradient(g, lam, bas_intensity(g, lam))).max()))
    return CheckResult("zero_gradient", worst <= 1e-12, worst, 1e-12, f"{pairs} graph/target pairs")


def check_tree_exactness(seed: int = 0, trees: int = 3) -> CheckResult:
    rng = np.random.default_rng(seed)
    graphs = [make_topology("star", 5)] + [
        make_topology("tree", int(rng.integers(3, 11)), seed=int(rng.integers(2**32))) for _ in range(trees)
    ]
    worst = 0.0
    for g in graphs:
        lam = random_interior_points(g, 1, rng)[0]
        worst = max(worst, float(np.abs(service_rates(g, bas_intensity(g, lam)) - lam).max()))
    return CheckResult("tree_exactness", worst <= 1e-9, worst, 1e-9, f"{len(graphs)} trees")


def check_gibbs_variational(seed: int = 0, trials: int = 1000) -> CheckResult:
    rng = np.random.default_rng(seed)
    violations = 0
    ident = 0.0
    for g in (make_topology("complete", 3), make_topology("path", 4)):
        rep = verify_gibbs_variational(g, rng.uniform(-2, 2, g.n), trials, seed=int(rng.integers(2**32)))
        violations += rep.violations
        ident = max(ident, rep.identity_error)
    ok = violations == 0 and ident <= 1e-10
    return CheckResult("gibbs_variational", ok, float(violations), 0.0,
                       f"free-energy identity error {ident:.3g} (tol 1e-10)")


def check_bethe_gradient_fd(seed: int = 0, points: int = 100, gradient=None) -> CheckResult:
    gradient = bethe_gradient if gradient is None else gradient
    rng = np.random.default_rng(seed)
    g = make_topology("complete", 3)
    r = rng.uniform(-2, 2, g.n)
    worst = 0.0
    for y in random_interior_points(g, points, rng):
        fd = central_gradient(lambda v: bethe_free_energy(g, v, r), y, step=1e-5 * min(y.min(), 1 - 2 * y.max()))
        worst = max(worst, max_relative_error(gradient(g, y, r), fd, floor=1e-3))
    return CheckResult("bethe_gradient_fd", worst < 1e-5, worst, 1e-5, "K3, central differences")


def check_k_b_gradient_fd(seed: int = 0, points: int = 100, gradient=None) -> CheckResult:
    """Analytic ``grad K_B`` against central differences of ``K_B``."""
    gradient = grad_k_b if gradient is None else gradient
    rng = np.random.default_rng(seed)
    u = UtilitySpec(1.0, 1.0)
    worst = 0.0
    for g in (make_topology("star", 5), make_topology("complete", 4), make_topology("ring", 6)):
        for y in random_interior_points(g, points // 3 + 1, rng):
            h = 1e-5 * min(y.min(), (1 - y[g.edge_u] - y[g.edge_v]).min())
            fd = central_gradient(lambda v: k_b(g, v, u), y, step=h)
            worst = max(worst, max_relative_error(gradient(g, y, u), fd, floor=1e-3))
    return CheckResult("k_b_gradient_fd", worst < 1e-5, worst, 1e-5, "star-5, K4, ring-6")


def check_hessian(seed: int = 0, points: int = 200, gradient=None) -> CheckResult:
    g = make_topology("star", 5)
    rep = hessian_check_k_b(g, UtilitySpec(1.0, 2.0 * g.max_degree), points, seed, gradient=gradient)
    return CheckResult("k_b_concavity", rep.passed, rep.max_eigenvalue, rep.eig_tol,
                       f"max Hessian/finite-difference deviation {rep.max_fd_error:.3g} (tol {rep.fd_tol:g})")


def check_simulator(seed: int = 0, duration: float = 2e5, bands: float = 5.0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    ok = True
    for g in (make_topology("complete", 3), make_topology("ring", 6)):
        cmp = estimate_vs_oracle(g, rng.uniform(-1, 2, g.n), duration, int(rng.integers(2**32)), bands)
        worst = max(worst, float((cmp.deviation / cmp.sigma).max()))
        ok &= cmp.all_within
    return CheckResult("simulator_vs_oracle", ok, worst, bands, "max deviation in standard errors")


ALL_CHECKS = (
    check_zero_gradient,
    check_tree_exactness,
    check_gibbs_variational,
    check_bethe_gradient_fd,
    check_k_b_gradient_fd,
    check_hessian,
    check_simulator,
)


def run_suite(seed: int = 0, checks=ALL_CHECKS) -> list[CheckResult]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConcavityWarning)
        return [check(seed=seed) for check in checks]
