"""Interference graphs and exhaustive enumeration of feasible schedules.

Vertices are links, numbered ``0 .. n-1``; an edge ``(i, j)`` means links
``i`` and ``j`` may not be active at the same time.  A feasible schedule is
therefore an independent set, stored throughout as an integer bitmask with
bit ``i`` set when link ``i`` is active.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import OracleIntractableError

DEFAULT_ENUMERATION_CAP = 24

TOPOLOGY_KINDS = ("complete", "ring", "star", "grid", "random", "path", "tree", "empty")


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class InterferenceGraph:
    """Undirected conflict graph on ``n`` links.

    Construct with :meth:`from_edges` (or :func:`make_topology`); the
    derived fields are filled in automatically and never change afterwards.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    name: str = ""
    adjacency: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    degrees: np.ndarray = field(init=False, repr=False, compare=False)
    edge_u: np.ndarray = field(init=False, repr=False, compare=False)
    edge_v: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"graph needs at least one link, got n={self.n}")
        norm = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop on link {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            norm.add((min(i, j), max(i, j)))
        edges = tuple(sorted(norm))
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "adjacency", tuple(tuple(sorted(a)) for a in nbrs))
        object.__setattr__(self, "degrees", _freeze(np.array([len(a) for a in nbrs], dtype=np.int64)))
        object.__setattr__(self, "edge_u", _freeze(np.array([e[0] for e in edges], dtype=np.intp)))
        object.__setattr__(self, "edge_v", _freeze(np.array([e[1] for e in edges], dtype=np.intp)))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]], name: str = "") -> "InterferenceGraph":
        return cls(int(n), tuple((int(i), int(j)) for i, j in edges), name)

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max())

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self.adjacency[i]

    def degree(self, i: int) -> int:
        return int(self.degrees[i])

    def neighbor_masks(self) -> np.ndarray:
        """Per-link bitmask of neighbours (requires ``n <= 62``)."""
        if self.n > 62:
            raise ValueError("bitmask representation supports at most 62 links")
        masks = np.zeros(self.n, dtype=np.int64)
        for i, nb in enumerate(self.adjacency):
            for j in nb:
                masks[i] |= np.int64(1) << np.int64(j)
        return masks

    def padded_neighbors(self) -> tuple[np.ndarray, np.ndarray]:
        """Neighbour index table padded to ``max_degree`` columns, plus its validity mask."""
        width = max(self.max_degree, 1)
        idx = np.zeros((self.n, width), dtype=np.intp)
        valid = np.zeros((self.n, width), dtype=bool)
        for i, nb in enumerate(self.adjacency):
            idx[i, : len(nb)] = nb
            valid[i, : len(nb)] = True
        return idx, valid

    def is_tree(self) -> bool:
        """True when the graph is connected and acyclic."""
        if self.num_edges != self.n - 1:
            return False
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for w in self.adjacency[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.n

    def is_feasible(self, sigma: Sequence[int]) -> bool:
        s = np.asarray(sigma)
        if self.num_edges == 0:
            return True
        return bool(np.all(s[self.edge_u] + s[self.edge_v] <= 1))


# ---------------------------------------------------------------------------
# topologies


def _complete(n):
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def _ring(n):
    if n == 1:
        return []
    if n == 2:
        return [(0, 1)]
    return [(i, (i + 1) % n) for i in range(n)]


def _grid(w, h):
    # vertex (x, y) -> x * h + y, 4-neighbourhood
    edges = []
    for x in range(w):
        for y in range(h):
            v = x * h + y
            if x + 1 < w:
                edges.append((v, v + h))
            if y + 1 < h:
                edges.append((v, v + 1))
    return edges


def make_topology(
    kind: str,
    size: int | None = None,
    *,
    width: int | None = None,
    height: int | None = None,
    p: float | None = None,
    seed: int | None = None,
) -> InterferenceGraph:
    """Build one of the standard interference topologies.

    Parameters
    ----------
    kind : str
        ``complete``, ``ring``, ``star`` (link 0 is the hub), ``grid``
        (``width x height`` lattice, 4-neighbourhood), ``random``
        (Erdős–Rényi with edge probability ``p``), ``path``, ``tree``
        (uniform random recursive tree) or ``empty``.
    size : int
        Number of links; for ``grid`` it may stand in for a square side.
    seed : int
        Required for the random kinds.
    """
    if kind not in TOPOLOGY_KINDS:
        raise ValueError(f"unknown topology kind {kind!r}; expected one of {TOPOLOGY_KINDS}")
    if kind == "grid":
        w = width if width is not None else size
        h = height if height is not None else w
        if w is None or h is None or w < 1 or h < 1:
            raise ValueError(f"grid needs width >= 1 and height >= 1, got {w}x{h}")
        return InterferenceGraph.from_edges(w * h, _grid(w, h), f"grid-{w}x{h}")
    if size is None or size < 1:
        raise ValueError(f"topology {kind!r} needs size >= 1, got {size}")
    n = int(size)
    if kind == "complete":
        edges = _complete(n)
    elif kind == "ring":
        edges = _ring(n)
    elif kind == "star":
        edges = [(0, j) for j in range(1, n)]
    elif kind == "path":
        edges = [(i, i + 1) for i in range(n - 1)]
    elif kind == "empty":
        edges = []
    else:
        if seed is None:
            raise ValueError(f"topology {kind!r} needs an explicit seed")
        rng = np.random.default_rng(seed)
        if kind == "tree":
            edges = [(int(rng.integers(0, v)), v) for v in range(1, n)]
        else:
            if p is None or not (0.0 <= p <= 1.0):
                raise ValueError(f"edge probability must lie in [0, 1], got {p}")
            edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        return InterferenceGraph.from_edges(n, edges, f"{kind}-{n}-s{seed}")
    return InterferenceGraph.from_edges(n, edges, f"{kind}-{n}")


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class ScheduleSet:
    """All independent sets of a graph, as bitmasks in lexicographic order.

    The order is lexicographic in ``(sigma_0, sigma_1, ..., sigma_{n-1})``,
    so the all-idle schedule comes first.
    """

    n: int
    masks: np.ndarray

    def __len__(self) -> int:
        return len(self.masks)

    def active(self, i: int) -> np.ndarray:
        """Boolean column: which schedules have link ``i`` active."""
        return ((self.masks >> np.int64(i)) & 1).astype(bool)

    def as_matrix(self) -> np.ndarray:
        """Dense ``(len, n)`` 0/1 matrix; only sensible for modest sizes."""
        return np.stack([self.active(i) for i in range(self.n)], axis=1).astype(np.int8)

    def sizes(self) -> np.ndarray:
        return _popcount(self.masks)

    def weights(self, r: np.ndarray) -> np.ndarray:
        """Log-weights ``sum_i sigma_i r_i`` of every schedule."""
        r = np.asarray(r, dtype=float)
        lw = np.zeros(len(self.masks))
        for i in range(self.n):
            if r[i] != 0.0:
                lw += r[i] * self.active(i)
        return lw


def _popcount(masks: np.ndarray) -> np.ndarray:
    x = masks.copy()
    count = np.zeros(len(x), dtype=np.int64)
    while np.any(x):
        count += x & 1
        x >>= 1
    return count


def enumeration_cap() -> int:
    return int(os.environ.get("BETHE_CSMA_ENUM_CAP", DEFAULT_ENUMERATION_CAP))


def enumerate_feasible_schedules(g: InterferenceGraph, cap: int | None = None) -> ScheduleSet:
    """Enumerate every independent set of ``g``.

    Vertices are added from the last to the first; at each step the
    existing partial schedules are kept with the new link idle, then
    repeated with it active wherever its neighbour mask is clear.  The
    result is lexicographic in ``sigma`` with no sorting needed.

    Raises
    ------
    OracleIntractableError
        When ``g.n`` exceeds ``cap`` (default 24, or ``BETHE_CSMA_ENUM_CAP``).
    """
    cap = enumeration_cap() if cap is None else cap
    if g.n > cap:
        raise OracleIntractableError(
            f"oracle intractable: exhaustive enumeration refused for n={g.n} > cap={cap}"
        )
    nbr = g.neighbor_masks()
    masks = np.zeros(1, dtype=np.int64)
    for i in range(g.n - 1, -1, -1):
        ok = masks[(masks & nbr[i]) == 0]
        masks = np.concatenate([masks, ok | (np.int64(1) << np.int64(i))])
    return ScheduleSet(g.n, _freeze(masks))


def independence_number(g: InterferenceGraph, schedules: ScheduleSet | None = None) -> int:
    s = enumerate_feasible_schedules(g) if schedules is None else schedules
    return int(_popcount(s.masks).max())


def independence_ratio(g: InterferenceGraph, schedules: ScheduleSet | None = None) -> float:
    """``alpha(G) / n``: an upper bound on :func:`symmetric_capacity`, tight on vertex-transitive graphs."""
    return independence_number(g, schedules) / g.n


def symmetric_capacity(g: InterferenceGraph, schedules: ScheduleSet | None = None) -> float:
    """Largest ``c`` such that the all-``c`` rate vector lies in the capacity region.

    Load ``L`` maps to the symmetric target ``L * capacity``.  On
    vertex-transitive graphs (complete, ring, isolated links) this equals
    ``alpha(G) / n``; elsewhere it can be strictly smaller, e.g. a star with
    ``k`` leaves has capacity ``1/2`` rather than ``k / (k + 1)``.  The LP
    optimum is rational and is snapped to the nearest small-denominator
    fraction so that exact cases come out exact.
    """
    c, _ = max_symmetric_rate(g, schedules)
    snapped = Fraction(c).limit_denominator(10_000)
    return float(snapped) if abs(float(snapped) - c) <= 1e-9 else c


def max_symmetric_rate(g: InterferenceGraph, schedules: ScheduleSet | None = None) -> tuple[float, np.ndarray]:
    """Largest ``c`` with ``c * 1`` a convex combination of schedules.

    Solved as a linear program over time-sharing weights; returns ``c`` and
    the weights (aligned with ``schedules.masks``).
    """
    from scipy.optimize import linprog

    s = enumerate_feasible_schedules(g) if schedules is None else schedules
    m = len(s)
    A = s.as_matrix().T.astype(float)  # (n, m)
    # variables: weights w (m), c ; maximize c
    cost = np.zeros(m + 1)
    cost[-1] = -1.0
    A_ub = np.hstack([-A, np.ones((g.n, 1))])  # c - A w <= 0
    A_eq = np.zeros((1, m + 1))
    A_eq[0, :m] = 1.0
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(g.n), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * (m + 1), method="highs")
    if not res.success:  # pragma: no cover - LP is always feasible
        raise RuntimeError(res.message)
    return float(res.x[-1]), res.x[:m]


def count_independent_sets(g: InterferenceGraph) -> int:
    return len(enumerate_feasible_schedules(g))


# ---------------------------------------------------------------------------
# edge-list exchange format


def format_edge_list(g: InterferenceGraph) -> str:
    lines = [f"n {g.n}"] + [f"{i} {j}" for i, j in g.edges]
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str, name: str = "") -> InterferenceGraph:
    """Parse the ``n <count>`` header followed by ``i j`` lines (0-indexed).

    Blank lines and ``#`` comments are ignored.
    """
    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "n":
            if len(parts) != 2 or n is not None:
                raise ValueError(f"line {lineno}: malformed or repeated header {raw!r}")
            n = int(parts[1])
            continue
        if n is None:
            raise ValueError(f"line {lineno}: edge before 'n <count>' header")
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'i j', got {raw!r}")
        edges.append((int(parts[0]), int(parts[1])))
    if n is None:
        raise ValueError("missing 'n <count>' header")
    return InterferenceGraph.from_edges(n, edges, name)


def read_edge_list(path: str | os.PathLike) -> InterferenceGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_edge_list(fh.read(), name=os.path.basename(str(path)))


def write_edge_list(g: InterferenceGraph, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_edge_list(g))


__all__ = [
    "DEFAULT_ENUMERATION_CAP",
    "InterferenceGraph",
    "ScheduleSet",
    "TOPOLOGY_KINDS",
    "count_independent_sets",
    "enumerate_feasible_schedules",
    "format_edge_list",
    "independence_number",
    "independence_ratio",
    "make_topology",
    "max_symmetric_rate",
    "parse_edge_list",
    "read_edge_list",
    "symmetric_capacity",
    "write_edge_list",
]
