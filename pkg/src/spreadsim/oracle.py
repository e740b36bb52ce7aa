"""Ground truth computed without the round simulator.

The stationary point ``x`` solves ``x_i = min(min_k f(x_k, e_ik, k), s_i)``.
Three independent routes compute it: a label-setting search
(:func:`stationary`), exhaustive simple-path enumeration
(:func:`stationary_bruteforce`) and a synchronous fixpoint sweep
(:func:`stationary_sweep`). On top of ``x`` sit the true-constraining
relation, the layers ``F_0, F_1, ...``, the effective diameter and the
convergence-time and ultimate-bound formulas.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import RaisingConfig
from .functions import SpreadingFunction
from .graph import Graph, shrunken

TIE_RTOL = 1e-12
BRUTEFORCE_MAX_NODES = 10


def _f(f: SpreadingFunction, a: float, b: float, k: int) -> float:
    return float(f(a, b, k))


def _close(u: float, v: float) -> bool:
    return abs(u - v) <= TIE_RTOL * max(1.0, abs(u), abs(v))


@dataclass(frozen=True)
class StationaryAnalysis:
    x: np.ndarray
    s_infinity: frozenset[int]
    true_constraining: tuple[frozenset[int], ...]
    layers: tuple[frozenset[int], ...]
    layer_of: np.ndarray
    effective_diameter: int

    @property
    def x_max(self) -> float:
        return float(self.x.max())

    @property
    def layer_minima(self) -> np.ndarray:
        """Smallest stationary value within each layer."""
        return np.array([min(self.x[j] for j in layer) for layer in self.layers])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "x", "layer", "is_source", "constraining_set"])
            for i, xi in enumerate(self.x):
                w.writerow([i, repr(float(xi)), int(self.layer_of[i]), int(i in self.s_infinity),
                            " ".join(str(k) for k in sorted(self.true_constraining[i]))])


def stationary_values(g: Graph, f: SpreadingFunction) -> np.ndarray:
    """Label-setting search for the stationary point.

    Nodes with finite maximum values seed the frontier; the smallest
    tentative label is settled and relaxed through ``f``. Monotonicity in
    the first argument plus progressivity mean a settled label is never
    improved later.
    """
    n = g.node_count
    s = g.max_values
    best = np.array(s, dtype=float)
    settled = np.zeros(n, dtype=bool)
    heap = [(float(s[i]), i) for i in sorted(g.finite_sources)]
    heapq.heapify(heap)
    while heap:
        val, u = heapq.heappop(heap)
        if settled[u] or val > best[u]:
            continue
        settled[u] = True
        for v, w in g.neighbors(u):
            if settled[v]:
                continue
            # v reads u's value across e_vu
            cand = _f(f, val, g.weight(v, u), u)
            if cand < best[v]:
                best[v] = cand
                heapq.heappush(heap, (cand, v))
    return best


def stationary(g: Graph, f: SpreadingFunction) -> StationaryAnalysis:
    return analyze(g, f, stationary_values(g, f))


def analyze(g: Graph, f: SpreadingFunction, x: np.ndarray) -> StationaryAnalysis:
    """Derive sources, true-constraining sets and layers from a stationary ``x``."""
    n = g.node_count
    s = g.max_values
    sources = frozenset(i for i in range(n) if math.isfinite(s[i]) and _close(x[i], s[i]))
    constraining = []
    for i in range(n):
        c = {k for k, w in g.neighbors(i) if _close(_f(f, x[k], w, k), x[i])}
        if i in sources:
            c.add(i)
        constraining.append(frozenset(c))

    # longest constraining chain, in increasing x (chain edges strictly decrease x)
    chain = np.zeros(n, dtype=int)
    for i in sorted(range(n), key=lambda j: (x[j], j)):
        length = 1 if i in sources else 0
        for k in constraining[i]:
            if k != i:
                length = max(length, chain[k] + 1)
        if length == 0:
            raise ValueError(f"node {i} has no constraining chain; x is not stationary")
        chain[i] = length
    diameter = int(chain.max())
    layers = tuple(frozenset(int(i) for i in np.flatnonzero(chain == d + 1)) for d in range(diameter))
    return StationaryAnalysis(x=np.asarray(x, dtype=float), s_infinity=sources,
                              true_constraining=tuple(constraining), layers=layers,
                              layer_of=chain - 1, effective_diameter=diameter)


def stationary_bruteforce(g: Graph, f: SpreadingFunction) -> np.ndarray:
    """Minimum over every simple path from a finite-maximum node.

    Along a path ``l_0, l_1, ...`` the value starts at ``s_{l_0}`` and each
    hop applies ``f``; a node's value is the least such endpoint value.
    """
    n = g.node_count
    if n > BRUTEFORCE_MAX_NODES:
        raise ValueError(f"brute force is limited to {BRUTEFORCE_MAX_NODES} nodes, got {n}")
    best = [math.inf] * n
    s = g.max_values

    def walk(u: int, val: float, visited: int) -> None:
        if val < best[u]:
            best[u] = val
        for v, _ in g.neighbors(u):
            if not visited >> v & 1:
                walk(v, _f(f, val, g.weight(v, u), u), visited | 1 << v)

    for j in sorted(g.finite_sources):
        walk(j, float(s[j]), 1 << j)
    return np.array(best)


def stationary_sweep(g: Graph, f: SpreadingFunction) -> np.ndarray:
    """Synchronous fixpoint iteration from ``x = s``; at most N+1 sweeps."""
    pad = g.padded
    x = np.array(g.max_values, dtype=float)
    for _ in range(g.node_count + 1):
        cand = np.where(pad.mask, f(x[pad.index], pad.weight, pad.index), np.inf)
        new = np.minimum(cand.min(axis=1), g.max_values)
        if np.array_equal(new, x):
            return x
        x = new
    raise RuntimeError("fixpoint sweep did not settle; is f progressive?")


def fixpoint_residual(g: Graph, f: SpreadingFunction, x: np.ndarray) -> float:
    pad = g.padded
    cand = np.where(pad.mask, f(x[pad.index], pad.weight, pad.index), np.inf)
    rhs = np.minimum(cand.min(axis=1), g.max_values)
    return float(np.max(np.abs(rhs - x)))


def geometric_sum(ratio: float, terms: int) -> float:
    """``sum_{i=0}^{terms-1} ratio**i``; zero for ``terms <= 0``."""
    if terms <= 0:
        return 0.0
    if ratio == 1.0:
        return float(terms)
    return (ratio**terms - 1.0) / (ratio - 1.0)


def unrooted_initial_min(g: Graph, initial: Sequence[float]) -> float:
    """Smallest initial estimate among nodes not starting at their finite maximum.

    Falls back to the global minimum when every node starts rooted.
    """
    x0 = np.asarray(initial, dtype=float)
    s = g.max_values
    rooted = np.isfinite(s) & (x0 == s)
    pool = x0[~rooted] if (~rooted).any() else x0
    return float(pool.min())


def rise_rate(f: SpreadingFunction, raising: RaisingConfig) -> float:
    """Per-round growth of the smallest unrooted estimate.

    Without a reachable raise branch (``M = 0`` or an infinite dead zone)
    only progressivity drives the growth.
    """
    if raising.M == 0 or math.isinf(raising.deadzone):
        return f.sigma
    return min(f.sigma, raising.delta)


def _rise_time(top: float, start: float, rate: float) -> int:
    return max(0, math.ceil((top - start) / rate))


def _layer_times(raising: RaisingConfig, layer_minima: Sequence[float], s_min: float,
                 top: float) -> list[int]:
    M, d = raising.M, raising.delta
    times = [max(0, math.ceil((M - m) / d)) + 2 for m in layer_minima]
    # tighter first layer: its estimates are already >= min(delta + s_min, top)
    times[0] = max(0, math.ceil((M - min(d + s_min, top)) / d)) + 2
    return times


def convergence_time_bound(analysis: StationaryAnalysis, g: Graph, f: SpreadingFunction,
                           raising: RaisingConfig, initial: Sequence[float]) -> int:
    """Round after which an unperturbed run sits exactly at ``x``."""
    rate = rise_rate(f, raising)
    T = _rise_time(analysis.x_max, unrooted_initial_min(g, initial), rate)
    times = _layer_times(raising, analysis.layer_minima, g.s_min, analysis.x_max)
    return T + sum(times)


@dataclass(frozen=True)
class UltimateBound:
    eps: float
    bound_plus: float
    bound_minus: float
    min_deadzone: float
    diameter: int
    shrunken_diameter: int
    shrunken_x: np.ndarray
    time_bound: int | None

    @property
    def bound(self) -> float:
        return max(self.bound_plus, self.bound_minus)


def ultimate_bound(g: Graph, f: SpreadingFunction, eps: float,
                   raising: RaisingConfig | None = None,
                   initial: Sequence[float] | None = None,
                   analysis: StationaryAnalysis | None = None) -> UltimateBound:
    """Steady-state error ceiling under edge noise bounded by ``eps``.

    ``time_bound`` is only computed when both ``raising`` and ``initial``
    are supplied.
    """
    if not 0 <= eps < g.e_min:
        raise ValueError(f"eps={eps} must lie in [0, e_min={g.e_min})")
    base = analysis if analysis is not None else stationary(g, f)
    g_minus = shrunken(g, eps)
    low = stationary(g_minus, f)
    w_plus = geometric_sum(f.L2, base.effective_diameter - 1)
    w_minus = geometric_sum(f.L2, low.effective_diameter - 1)
    time_bound = None
    if raising is not None and initial is not None:
        X = low.x
        X_max = float(X.max())
        T_minus = _rise_time(X_max, unrooted_initial_min(g, initial), rise_rate(f, raising))
        minima = [min(X[j] for j in layer) for layer in base.layers]
        time_bound = T_minus + sum(_layer_times(raising, minima, g.s_min, X_max))
    return UltimateBound(
        eps=eps,
        bound_plus=f.L1 * w_plus * eps,
        bound_minus=f.L1 * w_minus * eps,
        min_deadzone=(w_plus + w_minus) * f.L1 * eps,
        diameter=base.effective_diameter,
        shrunken_diameter=low.effective_diameter,
        shrunken_x=low.x,
        time_bound=time_bound,
    )
