"""Bounded per-round edge noise.

Each directed reading ``e_ik(t) = e_ik + eps_ik(t)`` is drawn from a
counter-based generator keyed on ``(seed, t, i, k)``, so a value can be
re-queried at any time and ``eps_ik(t)`` is independent of ``eps_ki(t)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import counter
from .graph import Graph

_STREAM = 0x5EED_ED6E


class Kind(str, Enum):
    NONE = "none"
    UNIFORM_SYMMETRIC = "uniform_symmetric"
    UNIFORM_POSITIVE = "uniform_positive"


@dataclass(frozen=True)
class PerturbationModel:
    kind: Kind = Kind.NONE
    eps: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not self.eps >= 0:
            raise ValueError(f"eps must be nonnegative, got {self.eps}")
        counter.seed_word(self.seed)

    def sample(self, t, i, k) -> np.ndarray:
        """``eps_ik(t)`` for broadcastable index arrays."""
        if self.kind is Kind.NONE or self.eps == 0:
            return np.zeros(np.broadcast_shapes(np.shape(t), np.shape(i), np.shape(k)))
        u = counter.uniform(self.seed, _STREAM, t, i, k)
        if self.kind is Kind.UNIFORM_POSITIVE:
            return u * self.eps
        return (2.0 * u - 1.0) * self.eps


class PerturbedEdges:
    """Edge-weight provider for :func:`spreadsim.engine.step`."""

    def __init__(self, model: PerturbationModel, g: Graph):
        if model.eps >= g.e_min:
            raise ValueError(f"eps={model.eps} must stay below e_min={g.e_min}")
        self.model = model
        self.graph = g
        pad = g.padded
        self._rows = np.broadcast_to(np.arange(g.node_count)[:, None], pad.index.shape)

    def __call__(self, t: int, i: int, k: int) -> float:
        return self.graph.weight(i, k) + float(self.model.sample(t, i, k))

    def padded_weights(self, t: int) -> np.ndarray:
        pad = self.graph.padded
        if self.model.kind is Kind.NONE:
            return pad.weight
        noise = self.model.sample(t, self._rows, pad.index)
        return np.where(pad.mask, pad.weight + noise, np.inf)


def edge_view(model: PerturbationModel, g: Graph) -> PerturbedEdges:
    return PerturbedEdges(model, g)
