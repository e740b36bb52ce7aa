"""Weighted undirected graphs with per-node maximum values.

Nodes are dense integers ``0..N-1``. Each node carries a maximum value
``s_i`` which is either a nonnegative float or ``INF`` (nodes with a finite
maximum are the candidate sources). Edge storage keeps both directions so a
malformed, asymmetric adjacency can still be represented and reported by
:func:`validate`.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

INF = math.inf

MAX_PLACEMENT_ATTEMPTS = 100


class GraphError(ValueError):
    pass


class DisconnectedPlacementError(GraphError):
    """No connected placement found within the retry budget."""


class Graph:
    """Immutable weighted graph; neighbor lists are sorted by node index."""

    def __init__(
        self,
        adjacency: Mapping[int, Mapping[int, float]] | list,
        max_values: Iterable[float],
        positions: np.ndarray | None = None,
    ):
        s = np.array([float(v) for v in max_values], dtype=float)
        n = len(s)
        if n == 0:
            raise GraphError("graph needs at least one node")
        if np.isnan(s).any():
            raise GraphError("max values must not be NaN")
        if isinstance(adjacency, Mapping):
            rows = [adjacency.get(i, {}) for i in range(n)]
            extra = set(adjacency) - set(range(n))
            if extra:
                raise GraphError(f"adjacency names unknown nodes {sorted(extra)}")
        else:
            rows = list(adjacency)
            if len(rows) != n:
                raise GraphError("adjacency length differs from max_values length")
        adj = []
        for i, row in enumerate(rows):
            items = dict(row).items() if isinstance(row, Mapping) else row
            entries = []
            for k, w in items:
                k = int(k)
                if not 0 <= k < n:
                    raise GraphError(f"edge ({i}, {k}) leaves the node range")
                w = float(w)
                if math.isnan(w):
                    raise GraphError(f"edge ({i}, {k}) has NaN weight")
                entries.append((k, w))
            entries.sort()
            adj.append(tuple(entries))
        self._adj = tuple(adj)
        self._s = s
        self._s.setflags(write=False)
        if positions is not None:
            positions = np.array(positions, dtype=float)
            if positions.shape != (n, 2):
                raise GraphError("positions must have shape (N, 2)")
            positions.setflags(write=False)
        self.positions = positions

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[tuple[int, int, float]],
                   max_values: Iterable[float], positions=None) -> "Graph":
        adj: dict[int, dict[int, float]] = {i: {} for i in range(node_count)}
        for i, j, w in edges:
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            if not (0 <= i < node_count and 0 <= j < node_count):
                raise GraphError(f"edge ({i}, {j}) leaves the node range")
            adj[i][j] = w
            adj[j][i] = w
        return cls(adj, max_values, positions)

    @property
    def node_count(self) -> int:
        return len(self._s)

    @property
    def max_values(self) -> np.ndarray:
        return self._s

    def neighbors(self, i: int) -> tuple[tuple[int, float], ...]:
        """``(k, e_ik)`` pairs for node ``i`` in increasing ``k``."""
        return self._adj[i]

    def weight(self, i: int, k: int) -> float:
        for j, w in self._adj[i]:
            if j == k:
                return w
        raise KeyError((i, k))

    def edges(self) -> list[tuple[int, int, float]]:
        """Undirected edges ``(i, j, w)`` with ``i < j``, using ``e_ij``."""
        return [(i, k, w) for i in range(self.node_count) for k, w in self._adj[i] if i < k]

    @property
    def edge_count(self) -> int:
        return len(self.edges())

    @cached_property
    def e_min(self) -> float:
        ws = [w for row in self._adj for _, w in row]
        return min(ws) if ws else INF

    @cached_property
    def finite_sources(self) -> frozenset[int]:
        return frozenset(int(i) for i in np.flatnonzero(np.isfinite(self._s)))

    @property
    def s_min(self) -> float:
        return float(self._s.min())

    @property
    def s_min_set(self) -> frozenset[int]:
        return frozenset(int(i) for i in np.flatnonzero(self._s == self.s_min))

    @cached_property
    def padded(self) -> "PaddedAdjacency":
        return PaddedAdjacency.build(self)

    def with_weights(self, fn) -> "Graph":
        adj = [{k: fn(i, k, w) for k, w in row} for i, row in enumerate(self._adj)]
        return Graph(adj, self._s, self.positions)

    def with_max_values(self, max_values) -> "Graph":
        return Graph([dict(r) for r in self._adj], max_values, self.positions)

    def is_connected(self) -> bool:
        return len(_reachable(self._adj, 0)) == self.node_count

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self._adj == other._adj and np.array_equal(self._s, other._s)

    def __repr__(self) -> str:
        return f"Graph(N={self.node_count}, M={self.edge_count}, sources={len(self.finite_sources)})"


@dataclass(frozen=True)
class PaddedAdjacency:
    """Rectangular neighbor tables for vectorized rounds.

    Row ``i`` lists neighbors in increasing index; padding slots carry
    ``index = i`` and ``weight = inf`` and are masked out.
    """

    index: np.ndarray
    weight: np.ndarray
    mask: np.ndarray

    @classmethod
    def build(cls, g: Graph) -> "PaddedAdjacency":
        n = g.node_count
        width = max(1, max(len(g.neighbors(i)) for i in range(n)))
        index = np.tile(np.arange(n)[:, None], (1, width))
        weight = np.full((n, width), INF)
        mask = np.zeros((n, width), dtype=bool)
        for i in range(n):
            row = g.neighbors(i)
            if row:
                ks, ws = zip(*row)
                index[i, : len(row)] = ks
                weight[i, : len(row)] = ws
                mask[i, : len(row)] = True
        for a in (index, weight, mask):
            a.setflags(write=False)
        return cls(index, weight, mask)


def _reachable(adj, start: int) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        i = queue.popleft()
        for k, _ in adj[i]:
            if k not in seen:
                seen.add(k)
                queue.append(k)
    return seen


def validate(g: Graph) -> list[str]:
    """List every way ``g`` breaks the standing graph assumptions; empty if none."""
    problems = []
    adj = [dict(row) for row in g._adj]
    for i, row in enumerate(adj):
        for k, w in row.items():
            if k == i:
                problems.append(f"self-loop at node {i}")
            if not w > 0:
                problems.append(f"nonpositive weight {w!r} on edge ({i}, {k})")
            elif not math.isfinite(w):
                problems.append(f"infinite weight on edge ({i}, {k})")
            back = adj[k].get(i)
            if back is None:
                problems.append(f"edge ({i}, {k}) has no reverse edge")
            elif i < k and back != w:
                problems.append(f"asymmetric weight on edge ({i}, {k}): {w!r} vs {back!r}")
    if not g.is_connected():
        problems.append("disconnected")
    if not g.finite_sources:
        problems.append("S* empty: no node has a finite maximum value")
    if (g.max_values < 0).any():
        bad = [int(i) for i in np.flatnonzero(g.max_values < 0)]
        problems.append(f"negative maximum value at nodes {bad}")
    return problems


def shrunken(g: Graph, eps: float) -> Graph:
    """Copy of ``g`` with every edge weight reduced by ``eps``."""
    if eps < 0:
        raise GraphError(f"eps must be nonnegative, got {eps}")
    if eps >= g.e_min:
        raise GraphError(f"eps={eps} must stay below e_min={g.e_min}")
    if eps == 0:
        return g
    return g.with_weights(lambda i, k, w: w - eps)


@dataclass(frozen=True)
class GeometricConfig:
    width: float
    height: float
    radius: float
    node_count: int
    seed: int = 0
    pinned: Mapping[int, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise GraphError("width and height must be positive")
        if not self.radius > 0:
            raise GraphError("radius must be positive")
        if self.node_count < 2:
            raise GraphError("node_count must be at least 2")
        if not 0 <= self.seed < 2**64:
            raise GraphError("seed must be a 64-bit unsigned integer")
        for i in self.pinned:
            if not 0 <= i < self.node_count:
                raise GraphError(f"pinned node {i} out of range")

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)


def geometric_graph(positions: np.ndarray, radius: float,
                    sources: Mapping[int, float]) -> Graph:
    """Unit-disk graph on fixed positions; weights are Euclidean distances."""
    pos = np.asarray(positions, dtype=float)
    n = len(pos)
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    adj: list[dict[int, float]] = [{} for _ in range(n)]
    ii, kk = np.nonzero(np.triu(dist <= radius, k=1))
    for i, k in zip(ii.tolist(), kk.tolist()):
        w = float(dist[i, k])
        if w == 0.0:
            # coincident points would make a zero-weight edge
            w = np.nextafter(0.0, 1.0)
        adj[i][k] = w
        adj[k][i] = w
    s = [INF] * n
    for i, v in sources.items():
        s[i] = float(v)
    return Graph(adj, s, pos)


def generate_geometric(config: GeometricConfig, sources: Mapping[int, float]) -> Graph:
    """Random connected unit-disk graph, deterministic in ``config.seed``.

    Positions are drawn uniformly in the rectangle; if the result is not
    connected a fresh placement is drawn from the same stream, up to
    ``MAX_PLACEMENT_ATTEMPTS`` times.
    """
    rng = np.random.default_rng(config.seed)
    scale = np.array([config.width, config.height])
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        pos = rng.random((config.node_count, 2)) * scale
        for i, xy in config.pinned.items():
            pos[i] = xy
        g = geometric_graph(pos, config.radius, sources)
        if g.is_connected():
            return g
    raise DisconnectedPlacementError(
        f"no connected placement of {config.node_count} nodes with radius "
        f"{config.radius} in {MAX_PLACEMENT_ATTEMPTS} attempts"
    )


def dumps(g: Graph) -> str:
    """Serialize to the ``N M`` / ``i j w`` / ``i s`` text format."""
    edges = g.edges()
    lines = [f"{g.node_count} {len(edges)}"]
    lines += [f"{i} {j} {w:.17g}" for i, j, w in edges]
    lines += [f"{i} {_fmt_s(v)}" for i, v in enumerate(g.max_values)]
    return "\n".join(lines) + "\n"


def _fmt_s(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:.17g}"


def loads(text: str) -> Graph:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 2:
        raise GraphError("line 1: expected header 'N M'")
    n, m = int(rows[0][0]), int(rows[0][1])
    if len(rows) != 1 + m + n:
        raise GraphError(f"expected {1 + m + n} non-empty lines, found {len(rows)}")
    edges = []
    for lineno, parts in enumerate(rows[1 : 1 + m], start=2):
        if len(parts) != 3:
            raise GraphError(f"line {lineno}: expected 'i j w'")
        edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    s = [INF] * n
    for lineno, parts in enumerate(rows[1 + m :], start=2 + m):
        if len(parts) != 2:
            raise GraphError(f"line {lineno}: expected 'i s'")
        s[int(parts[0])] = float(parts[1])
    return Graph.from_edges(n, edges, s)


def save(g: Graph, path: str | Path) -> None:
    Path(path).write_text(dumps(g))


def load(path: str | Path) -> Graph:
    return loads(Path(path).read_text())
