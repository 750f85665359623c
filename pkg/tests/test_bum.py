import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq, minimize

from bethe_csma.bas import bas_intensity
from bethe_csma.bethe import bethe_entropy, coordinate_margins
from bethe_csma.bum import (
    HIT_CONFLICT,
    HIT_LOWER,
    HIT_UPPER,
    ConcavityWarning,
    ProjectionSchedule,
    UtilitySpec,
    bum_recover_intensity,
    bum_run,
    grad_k_b,
    hessian_check_k_b,
    hessian_k_b,
    k_b,
    k_b_optimum,
    lemma2_diagnostics,
    mu_weights,
    project_star,
    random_interior_points,
    trace_header,
    utility_gap_bound,
    write_trace_csv,
)
from bethe_csma.errors import DomainError
from bethe_csma.graph import make_topology
from bethe_csma.numdiff import central_gradient, max_relative_error
from bethe_csma.oracle import service_rates

from ._csvutil import read_csv


def isolated_root():
    """Stationary point of ``log y + log 2 ... `` for one link: ``1/y = log(y/(1-y))``."""
    return brentq(lambda y: 1.0 / y - math.log(y / (1.0 - y)), 0.5, 0.999, xtol=1e-15)


def star_optimum_by_symmetry(beta=1.0):
    """Two-parameter search (hub, common leaf value) for the star-5 maximiser."""
    g = make_topology("star", 5)
    u = UtilitySpec(1.0, beta)

    def neg(v):
        a, b = v
        if a <= 0 or b <= 0 or a + b >= 1:
            return np.inf
        return -k_b(g, np.array([a, b, b, b, b]), u)

    grid = [(a, b) for a in np.linspace(0.01, 0.5, 60) for b in np.linspace(0.01, 0.98, 120) if a + b < 0.999]
    start = min(grid, key=neg)
    res = minimize(neg, start, method="Nelder-Mead", options=dict(xatol=1e-12, fatol=1e-15, maxiter=4000))
    a, b = res.x
    return np.array([a, b, b, b, b]), -res.fun


class TestUtilitySpec:
    @pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0, 2.0])
    def test_derivatives_match_finite_differences(self, alpha):
        u = UtilitySpec(alpha, 1.0)
        x = np.array([0.2, 0.5, 0.9])
        h = 1e-6
        np.testing.assert_allclose(u.dU(x), (u.U(x + h) - u.U(x - h)) / (2 * h), rtol=1e-7)
        np.testing.assert_allclose(u.d2U(x), (u.dU(x + h) - u.dU(x - h)) / (2 * h), rtol=1e-6, atol=1e-9)

    @pytest.mark.parametrize("z", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("alpha", [0.5, 1.0, 3.0])
    def test_inverse_marginal(self, z, alpha):
        u = UtilitySpec(alpha, 1.0)
        assert float(u.dU(u.dU_inv(z))) == pytest.approx(z, rel=1e-14)

    def test_log_case(self):
        assert UtilitySpec().total([1.0, math.e]) == pytest.approx(1.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            UtilitySpec(-1.0, 1.0)
        with pytest.raises(ValueError):
            UtilitySpec(1.0, 0.0)
        with pytest.raises(ValueError):
            UtilitySpec(0.0, 1.0).dU_inv(1.0)

    def test_concavity_threshold(self):
        g = make_topology("star", 5)
        assert UtilitySpec(1.0, 8.0).in_concave_regime(g)
        assert not UtilitySpec(1.0, 1.0).in_concave_regime(g)
        assert UtilitySpec(2.0, 1.0).concavity_threshold(g) == 4.0


class TestProjectionSchedule:
    def test_default_values(self):
        s = ProjectionSchedule.default()
        assert s.c1(1) == pytest.approx(1 / (100 * math.log(1 + math.e)))
        assert s.c2(16) == pytest.approx(1 / (5 * 2))

    def test_both_vanish(self):
        s = ProjectionSchedule.default()
        assert s.c1(1e12) < s.c1(10) and s.c2(1e12) < 1e-3

    def test_rate_condition_tends_to_zero(self):
        s = ProjectionSchedule.default()
        t = np.logspace(2, 40, 60)
        rc = s.rate_condition(t, 1.0)
        assert np.all(np.diff(rc) < 0)
        assert rc[-1] < 1e-3

    def test_custom_scales_in_description(self):
        assert "200" in ProjectionSchedule.default(c1_scale=200).description


class TestObjective:
    def test_single_link_half(self):
        assert k_b(make_topology("empty", 1), [0.5], UtilitySpec()) == pytest.approx(0.0, abs=1e-15)

    def test_gradient_single_link_half(self):
        assert grad_k_b(make_topology("empty", 1), [0.5], UtilitySpec()) == pytest.approx([2.0], abs=1e-15)

    def test_guard_below_floor(self):
        with pytest.raises(DomainError, match="link 0"):
            k_b(make_topology("empty", 2), [1e-310, 0.5], UtilitySpec())

    def test_exterior(self):
        with pytest.raises(DomainError):
            grad_k_b(make_topology("path", 2), [0.6, 0.6], UtilitySpec())

    def test_decomposition(self, rng):
        g = make_topology("ring", 6)
        u = UtilitySpec(1.0, 3.0)
        y = random_interior_points(g, 1, rng)[0]
        assert k_b(g, y, u) == pytest.approx(3.0 * np.log(y).sum() + bethe_entropy(g, y), abs=1e-13)

    @pytest.mark.parametrize("g", [make_topology("star", 5), make_topology("complete", 4),
                                   make_topology("grid", width=3, height=3)], ids=lambda g: g.name)
    @pytest.mark.parametrize("alpha", [1.0, 2.0])
    def test_gradient_finite_differences(self, g, alpha, rng):
        u = UtilitySpec(alpha, 1.5)
        worst = 0.0
        for y in random_interior_points(g, 100, rng):
            fd = central_gradient(lambda v: k_b(g, v, u), y, step=1e-5 * coordinate_margins(g, y))
            worst = max(worst, max_relative_error(grad_k_b(g, y, u), fd, floor=1e-3))
        assert worst < 1e-5

    def test_gradient_is_local(self, rng):
        g = make_topology("path", 5)
        u = UtilitySpec()
        y = random_interior_points(g, 1, rng)[0]
        base = grad_k_b(g, y, u)
        y2 = y.copy()
        y2[4] *= 0.5
        assert np.array_equal(grad_k_b(g, y2, u)[:3], base[:3])

    def test_hessian_matches_formula_on_path(self):
        g = make_topology("path", 2)
        u = UtilitySpec(1.0, 2.0)
        y = np.array([0.3, 0.4])
        d = 2.0 * (-1 / 0.09) + 0 / 0.7 - 1 / 0.3 - 1 / 0.3
        H = hessian_k_b(g, y, u)
        assert H[0, 0] == pytest.approx(d)
        assert H[0, 1] == pytest.approx(-1 / 0.3)
        assert H[0, 1] == H[1, 0]

    @given(st.floats(1e-3, 0.999), st.floats(0.01, 50))
    @settings(max_examples=50, deadline=None)
    def test_isolated_link_hessian_negative(self, y, beta):
        assert hessian_k_b(make_topology("empty", 1), [y], UtilitySpec(1.0, beta))[0, 0] < 0


class TestProjectStar:
    def test_upper_clamp(self):
        assert project_star(0.8, 0.9, 0.3, 0.01, 0.1) == pytest.approx(0.75)

    def test_identity_region(self):
        assert project_star(0.3, 0.3, 0.2, 0.01, 0.05) == 0.3

    def test_lower_clamp(self):
        assert project_star(1e-6, 0.3, 0.2, 0.01, 0.05) == 0.01

    def test_conflict_lower_wins(self):
        # upper bound (1 + 0.1 - 0.9 - 0.1)/2 = 0.05 sits below c1 = 0.2
        assert project_star(0.5, 0.1, 0.9, 0.2, 0.1) == 0.2
        assert project_star(0.01, 0.1, 0.9, 0.2, 0.1) == 0.2

    @given(st.floats(-1, 2), st.floats(0.001, 0.99), st.floats(0, 0.99), st.floats(1e-4, 0.1), st.floats(1e-4, 0.3))
    def test_result_within_bounds(self, x, yi, nmax, c1, c2):
        v = project_star(x, yi, nmax, c1, c2)
        upper = (1 + yi - nmax - c2) / 2
        assert v >= c1
        assert v <= max(upper, c1) + 1e-15


class TestMuWeights:
    def test_four(self):
        w = np.array([1, 2 ** -0.5, 3 ** -0.5, 0.5])
        np.testing.assert_allclose(mu_weights(4), w / w.sum(), rtol=1e-15)
        # four-decimal reference values, within rounding of the last digit
        np.testing.assert_allclose(mu_weights(4), [0.3591, 0.2539, 0.2074, 0.1796], atol=1e-4)

    @given(st.integers(1, 500))
    def test_normalised_and_decreasing(self, T):
        w = mu_weights(T)
        assert w.sum() == pytest.approx(1.0)
        assert np.all(np.diff(w) < 0)


class TestBumRun:
    def test_isolated_link_converges(self):
        trace = bum_run(make_topology("empty", 1), UtilitySpec(), ProjectionSchedule.default(), T=2000)
        assert abs(trace.final_y[0] - isolated_root()) <= 1e-3
        assert isolated_root() == pytest.approx(0.7821, abs=1e-4)

    def test_starts_at_a_quarter(self, quiet_concavity):
        trace = bum_run(make_topology("ring", 5), T=3)
        np.testing.assert_array_equal(trace.y[0], 0.25)
        assert trace.T == 3 and trace.y.shape == (3, 5)

    def test_records_bas_intensities(self, quiet_concavity):
        g = make_topology("complete", 4)
        trace = bum_run(g, T=20)
        for t in (0, 7, 19):
            np.testing.assert_array_equal(trace.r[t], bas_intensity(g, trace.y[t]))
            assert trace.k[t] == k_b(g, trace.y[t], UtilitySpec())

    def test_single_step_by_hand(self, quiet_concavity):
        g = make_topology("path", 2)
        u = UtilitySpec()
        s = ProjectionSchedule.default()
        trace = bum_run(g, u, s, T=2)
        y = np.full(2, 0.25)
        x = y + grad_k_b(g, y, u) / 1.0
        upper = (1 + y - y[::-1] - s.c2(1)) / 2
        np.testing.assert_allclose(trace.y[1], np.maximum(np.minimum(x, upper), s.c1(1)), rtol=0, atol=0)
        assert trace.hits[1].tolist() == [HIT_UPPER, HIT_UPPER]

    def test_deterministic(self, quiet_concavity):
        g = make_topology("grid", width=3, height=3)
        a, b = bum_run(g, T=300), bum_run(g, T=300)
        assert np.array_equal(a.y, b.y) and np.array_equal(a.k, b.k) and np.array_equal(a.hits, b.hits)

    @pytest.mark.parametrize("g", [make_topology("star", 5), make_topology("complete", 5), make_topology("ring", 7),
                                   make_topology("grid", width=5, height=5)], ids=lambda g: g.name)
    def test_interior_invariance(self, g, quiet_concavity):
        trace = bum_run(g, T=1000)
        floor = np.minimum.accumulate(trace.c1)
        assert np.all(trace.y >= floor[:, None] * (1 - 1e-12))
        assert np.all(trace.y[:, g.edge_u] + trace.y[:, g.edge_v] < 1)
        assert np.all(np.isfinite(trace.k))

    def test_warns_outside_concave_regime(self):
        with pytest.warns(ConcavityWarning):
            bum_run(make_topology("star", 5), T=2)

    def test_no_warning_in_regime(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            bum_run(make_topology("star", 5), UtilitySpec(1.0, 8.0), T=2)

    def test_rejects_bad_horizon(self):
        with pytest.raises(ValueError):
            bum_run(make_topology("empty", 1), T=0)

    def test_best_and_sampled_iterates(self, quiet_concavity, rng):
        trace = bum_run(make_topology("star", 5), T=200)
        assert trace.k[trace.best_index] == trace.k.max()
        y = trace.sample_iterate(rng)
        assert any(np.array_equal(y, row) for row in trace.y)

    def test_hit_masks(self, quiet_concavity):
        trace = bum_run(make_topology("path", 2), T=2)
        assert trace.hit_masks().tolist() == [0, 3]


class TestOptimum:
    def test_star_against_symmetric_search(self, quiet_concavity):
        g = make_topology("star", 5)
        y_star, k_star = k_b_optimum(g, UtilitySpec())
        y_ref, k_ref = star_optimum_by_symmetry()
        assert k_star == pytest.approx(k_ref, abs=1e-9)
        np.testing.assert_allclose(y_star, y_ref, atol=1e-5)
        assert np.abs(grad_k_b(g, y_star, UtilitySpec())).max() < 1e-8

    def test_isolated_link(self):
        y, _ = k_b_optimum(make_topology("empty", 1), UtilitySpec())
        assert y[0] == pytest.approx(isolated_root(), abs=1e-12)

    def test_cached(self):
        g = make_topology("ring", 5)
        assert k_b_optimum(g, UtilitySpec(1.0, 4.0))[0] is k_b_optimum(g, UtilitySpec(1.0, 4.0))[0]

    @pytest.mark.parametrize("T", [100, 400, 1600])
    def test_mu_gap_nonnegative(self, T, quiet_concavity):
        g = make_topology("star", 5)
        _, k_star = k_b_optimum(g, UtilitySpec())
        assert bum_run(g, T=T).mu_gap(k_star) >= 0

    def test_mu_gap_decreases(self, quiet_concavity):
        g = make_topology("star", 5)
        _, k_star = k_b_optimum(g, UtilitySpec())
        trace = bum_run(g, T=1600)
        gaps = [trace.mu_gap(k_star, T) for T in (100, 400, 1600)]
        assert gaps[0] > gaps[1] > gaps[2]
        scaled = [gp * math.sqrt(T) / math.log(T) for gp, T in zip(gaps, (100, 400, 1600))]
        assert max(scaled) / min(scaled) < 2.0

    def test_mu_gap_range(self, quiet_concavity):
        trace = bum_run(make_topology("empty", 1), T=10)
        with pytest.raises(ValueError):
            trace.mu_gap(0.0, 11)


class TestRecovery:
    def test_delegates_to_bas(self, quiet_concavity):
        g = make_topology("ring", 6)
        y = bum_run(g, T=100).final_y
        assert np.array_equal(bum_recover_intensity(g, y), bas_intensity(g, y))

    def test_tree_run_is_reproduced_exactly(self, quiet_concavity):
        g = make_topology("star", 5)
        y = bum_run(g, T=500).final_y
        assert np.abs(service_rates(g, bum_recover_intensity(g, y)) - y).max() <= 1e-9

    def test_triangle_gap_bound_is_reported(self, quiet_concavity):
        g = make_topology("complete", 3)
        u = UtilitySpec()
        y = bum_run(g, T=500).final_y
        s = service_rates(g, bum_recover_intensity(g, y))
        bound = utility_gap_bound(float(np.abs(s - y).max()), s, u, g.n)
        assert np.isfinite(bound) and bound >= 3 * math.log(2)


class TestHessianCheck:
    def test_star_in_regime(self):
        rep = hessian_check_k_b(make_topology("star", 5), UtilitySpec(1.0, 8.0), 200, seed=0)
        assert rep.concave_regime and rep.eigen_ok and rep.fd_ok and rep.passed

    def test_report_only_below_threshold(self):
        rep = hessian_check_k_b(make_topology("complete", 3), UtilitySpec(1.0, 1.0), 50, seed=0)
        assert not rep.concave_regime
        assert rep.fd_ok and rep.passed

    def test_wrong_gradient_is_caught(self):
        g = make_topology("star", 5)
        rep = hessian_check_k_b(g, UtilitySpec(1.0, 8.0), 20, seed=0, gradient=lambda g, y, u: -grad_k_b(g, y, u))
        assert not rep.fd_ok and not rep.passed


class TestInteriorDiagnostics:
    def test_isolated_link_clamps_stop(self):
        sched = ProjectionSchedule.default()
        trace = bum_run(make_topology("empty", 1), UtilitySpec(), sched, T=2000)
        rep = lemma2_diagnostics(trace, sched=sched)
        assert rep.all_interior
        assert rep.last_clamp_t < 2000
        assert rep.surrogate_t_star is not None and rep.surrogate_t_star < 2000

    def test_star_crossover_reported(self, quiet_concavity):
        sched = ProjectionSchedule.default()
        trace = bum_run(make_topology("star", 5), UtilitySpec(), sched, T=1000)
        rep = lemma2_diagnostics(trace, sched=sched)
        assert rep.all_interior
        assert rep.min_rate > 0 and rep.min_edge_slack > 0
        assert rep.step_crossover_t is None or 1 <= rep.step_crossover_t <= 1000
        assert np.isfinite(rep.rate_condition_final)

    def test_conflicts_flagged(self, quiet_concavity):
        # a huge lower clamp forces the conflict branch on the first update
        sched = ProjectionSchedule(lambda t: 0.45, lambda t: 0.3, "conflict")
        trace = bum_run(make_topology("path", 2), UtilitySpec(), sched, T=2)
        assert trace.hits[1].tolist() == [HIT_UPPER | HIT_CONFLICT] * 2
        assert lemma2_diagnostics(trace, sched=sched).conflicts == 2
        np.testing.assert_array_equal(trace.y[1], 0.45)

    def test_lower_flag(self):
        # from y = 0.9 the first step overshoots below zero and is clamped to c1
        sched = ProjectionSchedule.default()
        trace = bum_run(make_topology("empty", 1), UtilitySpec(), sched, T=2, y0=[0.9])
        assert trace.hits[1, 0] == HIT_LOWER
        assert trace.y[1, 0] == sched.c1(1)


class TestTraceCsv:
    def test_schema_and_round_trip(self, tmp_path, quiet_concavity):
        g = make_topology("ring", 4)
        trace = bum_run(g, T=50)
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        header, rows = read_csv(path)
        assert header == trace_header(4) == ["t", "K_B", "y_0", "y_1", "y_2", "y_3",
                                             "r_0", "r_1", "r_2", "r_3", "hit_mask"]
        assert len(rows) == 50
        assert [float(v) for v in rows[10][2:6]] == trace.y[10].tolist()
        assert float(rows[-1][1]) == trace.k[-1]
        assert int(rows[1][-1]) == int(trace.hit_masks()[1])
