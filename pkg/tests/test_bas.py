import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bethe_csma.bas import bas_intensity, bas_with_margin, max_admissible_margin
from bethe_csma.bethe import bethe_gradient
from bethe_csma.bum import random_interior_points
from bethe_csma.errors import DomainError
from bethe_csma.graph import make_topology
from bethe_csma.oracle import service_rates


def bas_by_loops(g, lam):
    """Closed form evaluated link by link from the neighbour lists."""
    out = []
    for i in range(g.n):
        num = lam[i] * (1 - lam[i]) ** (g.degree(i) - 1)
        den = 1.0
        for j in g.neighbors(i):
            den *= 1 - lam[i] - lam[j]
        out.append(math.log(num / den))
    return np.array(out)


@st.composite
def graph_and_target(draw, kinds=("complete", "ring", "star", "grid", "random")):
    kind = draw(st.sampled_from(kinds))
    seed = draw(st.integers(0, 2**32 - 1))
    if kind == "grid":
        g = make_topology("grid", width=draw(st.integers(1, 3)), height=draw(st.integers(1, 4)))
    elif kind in ("random", "tree"):
        g = make_topology(kind, draw(st.integers(2, 10)), p=0.35, seed=seed)
    else:
        g = make_topology(kind, draw(st.integers(2, 12)))
    return g, random_interior_points(g, 1, np.random.default_rng(seed))[0]


class TestBasIntensity:
    @pytest.mark.parametrize(
        "g,lam,expected",
        [
            (make_topology("empty", 1), [0.5], [0.0]),
            (make_topology("path", 2), [0.3, 0.3], [math.log(0.75)] * 2),
            (make_topology("complete", 3), [0.2, 0.2, 0.2], [math.log(4 / 9)] * 3),
        ],
        ids=["isolated", "path2", "K3"],
    )
    def test_examples(self, g, lam, expected):
        np.testing.assert_allclose(bas_intensity(g, lam), expected, rtol=1e-14, atol=1e-15)

    def test_isolated_links_get_the_logit(self):
        lam = np.array([0.1, 0.7, 0.4])
        np.testing.assert_allclose(bas_intensity(make_topology("empty", 3), lam), np.log(lam / (1 - lam)))

    @given(graph_and_target())
    @settings(max_examples=60, deadline=None)
    def test_matches_loop_formula(self, gt):
        g, lam = gt
        np.testing.assert_allclose(bas_intensity(g, lam), bas_by_loops(g, lam), rtol=1e-12, atol=1e-12)

    @given(graph_and_target())
    @settings(max_examples=100, deadline=None)
    def test_zero_gradient_identity(self, gt):
        g, lam = gt
        assert np.abs(bethe_gradient(g, lam, bas_intensity(g, lam))).max() <= 1e-12

    @given(graph_and_target(kinds=("star", "tree")))
    @settings(max_examples=30, deadline=None)
    def test_tree_exactness(self, gt):
        g, lam = gt
        if g.is_tree():
            assert np.abs(service_rates(g, bas_intensity(g, lam)) - lam).max() <= 1e-9

    def test_locality(self, rng):
        g = make_topology("grid", width=4, height=4)
        lam = random_interior_points(g, 1, rng)[0]
        base = bas_intensity(g, lam)
        for k in range(g.n):
            bumped = lam.copy()
            bumped[k] *= 0.9
            r = bas_intensity(g, bumped)
            untouched = [i for i in range(g.n) if i != k and k not in g.neighbors(i)]
            assert np.array_equal(r[untouched], base[untouched])

    def test_large_magnitudes_are_not_clamped(self):
        g = make_topology("complete", 3)
        r = bas_intensity(g, [0.4999999, 0.4999999, 1e-9])
        assert r.max() > 10 and r.min() < -10

    @pytest.mark.parametrize(
        "lam,match",
        [([0.0, 0.2, 0.2], "link 0"), ([0.5, 0.5, 0.1], r"edge \(0, 1\)"), ([0.2, -0.1, 0.2], "link 1")],
    )
    def test_domain_errors(self, lam, match):
        with pytest.raises(DomainError, match=match):
            bas_intensity(make_topology("complete", 3), lam)


class TestMargin:
    def test_matches_inflated_targets(self):
        g = make_topology("star", 5)
        np.testing.assert_array_equal(bas_with_margin(g, np.full(5, 0.15), 0.01), bas_intensity(g, np.full(5, 0.16)))

    def test_zero_margin(self, rng):
        g = make_topology("ring", 5)
        lam = random_interior_points(g, 1, rng)[0]
        np.testing.assert_array_equal(bas_with_margin(g, lam, 0.0), bas_intensity(g, lam))

    def test_too_large(self):
        with pytest.raises(DomainError, match=r"eps must be below 0\.3"):
            bas_with_margin(make_topology("complete", 3), np.full(3, 0.2), 0.3)

    def test_max_admissible(self):
        g = make_topology("complete", 3)
        assert max_admissible_margin(g, np.full(3, 0.2)) == pytest.approx(0.3)
        assert max_admissible_margin(make_topology("empty", 2), [0.1, 0.6]) == pytest.approx(0.4)

    def test_margin_gives_strict_stability_on_trees(self):
        g = make_topology("star", 5)
        lam = np.full(5, 0.15)
        assert np.all(service_rates(g, bas_with_margin(g, lam, 0.01)) > lam)
