import itertools
import warnings

import numpy as np
import pytest

from bethe_csma.bum import ConcavityWarning

_ACCEPTANCE_LINES: list[str] = []


def brute_force_independent_sets(n, edges):
    """Every 0/1 vector of length ``n`` with no edge fully active, as bitmasks."""
    out = []
    for bits in itertools.product((0, 1), repeat=n):
        if all(not (bits[i] and bits[j]) for i, j in edges):
            out.append(sum(b << i for i, b in enumerate(bits)))
    return sorted(out)


def brute_force_marginals(n, edges, r):
    """Direct (non-log-space) Gibbs marginals for small graphs."""
    r = np.asarray(r, dtype=float)
    z = 0.0
    acc = np.zeros(n)
    for m in brute_force_independent_sets(n, edges):
        sigma = np.array([(m >> i) & 1 for i in range(n)], dtype=float)
        w = np.exp(sigma @ r)
        z += w
        acc += w * sigma
    return acc / z, z


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def quiet_concavity():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConcavityWarning)
        yield


@pytest.fixture
def acceptance_line():
    def record(number: int, title: str, passed: bool, measured: str):
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {measured}"
        _ACCEPTANCE_LINES.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
