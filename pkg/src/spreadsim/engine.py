"""Round-synchronous update of the general spreading block.

Each round every node ``i`` computes the neighborhood candidate

    tilde_i(t+1) = min(min_k f(x_k(t), e_ik(t), k), s_i)

from round-``t`` estimates only, then either accepts it (``x_i(t) >= M`` or
``|x_i(t) - tilde_i(t+1)| <= D``) or raises its own estimate to
``g(x_i(t)) >= x_i(t) + delta``. Accepting nodes form the set A(t), raising
nodes the set E(t). The state also tracks each node's constraining node and
the rooted set R(t); the unrooted set is ``U(t) = V \\ R(t)``.

With ``M = 0`` (or ``D = inf``) the raise branch never fires and a round is
exactly the plain spreading update.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .functions import SpreadingFunction
from .graph import Graph


@dataclass(frozen=True)
class RaisingConfig:
    M: float
    delta: float
    deadzone: float = 0.0
    g: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.M >= 0 and math.isfinite(self.M)):
            raise ValueError(f"M must be finite and nonnegative, got {self.M}")
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError(f"delta must be finite and positive, got {self.delta}")
        if not self.deadzone >= 0:
            raise ValueError(f"dead zone must be nonnegative, got {self.deadzone}")

    def raise_(self, x: np.ndarray) -> np.ndarray:
        if self.g is None:
            return x + self.delta
        return np.asarray(self.g(x), dtype=float)


PLAIN = RaisingConfig(M=0.0, delta=1.0, deadzone=math.inf)
"""Configuration under which the block reduces to the plain spreading update."""


class EdgeView(Protocol):
    def padded_weights(self, t: int) -> np.ndarray: ...


@dataclass(frozen=True)
class SimulationState:
    t: int
    estimates: np.ndarray
    tilde: np.ndarray
    constraining: np.ndarray
    in_A: np.ndarray
    in_S: np.ndarray
    in_R: np.ndarray

    @property
    def in_E(self) -> np.ndarray:
        return ~self.in_A

    @property
    def in_U(self) -> np.ndarray:
        return ~self.in_R

    def unrooted_min(self) -> float | None:
        """Smallest estimate over U(t), or ``None`` when U(t) is empty."""
        if self.in_R.all():
            return None
        return float(self.estimates[~self.in_R].min())


def init(g: Graph, initial: Sequence[float]) -> SimulationState:
    x0 = np.array(initial, dtype=float)
    if x0.shape != (g.node_count,):
        raise ValueError(f"expected {g.node_count} initial values, got shape {x0.shape}")
    if not np.isfinite(x0).all():
        raise ValueError("initial estimates must be finite")
    if (x0 < 0).any():
        raise ValueError("initial estimates must be nonnegative")
    s = g.max_values
    in_S = np.isfinite(s) & (x0 == s)
    n = g.node_count
    return SimulationState(
        t=0,
        estimates=x0,
        tilde=x0.copy(),
        constraining=np.arange(n),
        in_A=np.ones(n, dtype=bool),
        in_S=in_S,
        in_R=in_S.copy(),
    )


def step(state: SimulationState, g: Graph, f: SpreadingFunction, raising: RaisingConfig,
         edge_view: EdgeView | None = None) -> SimulationState:
    pad = g.padded
    weights = pad.weight if edge_view is None else edge_view.padded_weights(state.t)
    x = state.estimates
    cand = f(x[pad.index], weights, pad.index)
    cand = np.where(pad.mask, cand, np.inf)
    rows = np.arange(g.node_count)
    best = np.argmin(cand, axis=1)  # first minimum = lowest neighbor index
    nbr_min = cand[rows, best]
    s = g.max_values
    tilde = np.minimum(nbr_min, s)
    from_self = nbr_min >= s

    accept = (x >= raising.M) | (np.abs(x - tilde) <= raising.deadzone)
    new = np.where(accept, tilde, raising.raise_(x))
    if math.isfinite(f.value_cap):
        new = np.minimum(new, f.value_cap)

    constraining = np.where(accept & ~from_self, pad.index[rows, best], rows)
    in_S = np.isfinite(s) & (new == s)
    in_R = in_S | state.in_R[constraining]
    return SimulationState(state.t + 1, new, tilde, constraining, accept, in_S, in_R)


Observer = Callable[[SimulationState], None]


@dataclass
class Trajectory:
    """Recorded rounds; per-round arrays are stacked along axis 0."""

    rounds: list[int]
    estimates: np.ndarray
    tilde: np.ndarray
    in_A: np.ndarray
    in_R: np.ndarray
    constraining: np.ndarray
    final: SimulationState

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["round", "node", "estimate", "tilde", "in_A", "in_R", "constraining"])
            for r, t in enumerate(self.rounds):
                for i in range(self.estimates.shape[1]):
                    w.writerow([t, i, repr(float(self.estimates[r, i])), repr(float(self.tilde[r, i])),
                                int(self.in_A[r, i]), int(self.in_R[r, i]), int(self.constraining[r, i])])


def run(g: Graph, f: SpreadingFunction, raising: RaisingConfig, initial: Sequence[float],
        max_rounds: int, edge_view: EdgeView | None = None,
        observers: Iterable[Observer] = (), record_every: int = 1,
        stop_when_stationary: bool = False) -> Trajectory:
    """Iterate :func:`step` up to ``max_rounds`` times.

    Observers see every state, round 0 included. ``record_every=k`` keeps
    every k-th round plus the last one; ``0`` keeps only round 0 and the
    final state. ``stop_when_stationary`` ends the run once a round leaves
    every estimate unchanged, which (without perturbation) is a fixpoint.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    if stop_when_stationary and edge_view is not None:
        raise ValueError("stationarity stop is only meaningful without perturbation")
    observers = list(observers)
    state = init(g, initial)
    kept = [state]
    for obs in observers:
        obs(state)
    for _ in range(max_rounds):
        prev = state
        state = step(state, g, f, raising, edge_view)
        for obs in observers:
            obs(state)
        done = stop_when_stationary and np.array_equal(prev.estimates, state.estimates)
        if record_every and state.t % record_every == 0:
            kept.append(state)
        if done:
            break
    if kept[-1] is not state:
        kept.append(state)
    return Trajectory(
        rounds=[st.t for st in kept],
        estimates=np.stack([st.estimates for st in kept]),
        tilde=np.stack([st.tilde for st in kept]),
        in_A=np.stack([st.in_A for st in kept]),
        in_R=np.stack([st.in_R for st in kept]),
        constraining=np.stack([st.constraining for st in kept]),
        final=state,
    )
