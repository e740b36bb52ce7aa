"""Spreading functions ``f(a, b)`` and their analytic constants.

A spreading function maps a neighbor's estimate ``a`` and the connecting
edge weight ``b`` to a candidate value. Rules are evaluated elementwise on
numpy arrays and receive the neighbor's node id as a third argument so that
neighbor-dependent rules (the hazard metric) fit the same interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .graph import Graph


@dataclass(frozen=True)
class SpreadingFunction:
    """A progressive rule, monotone in its first argument.

    ``sigma`` is the progressivity margin, ``L1``/``L2`` the Lipschitz
    constants in the edge weight and in the estimate respectively, and
    ``monotone_second`` records whether the rule is nondecreasing in the
    edge weight. ``value_cap`` clips simulated estimates (MPP keeps them
    at most 1).
    """

    name: str
    rule: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    sigma: float
    L1: float
    L2: float
    monotone_second: bool = True
    value_cap: float = math.inf
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"{self.name}: sigma must be positive, got {self.sigma}")

    def __call__(self, a, b, k=0):
        return self.rule(np.asarray(a, dtype=float), np.asarray(b, dtype=float), np.asarray(k))


def _sum_rule(a, b, k):
    return a + b


def abf_sum(sigma: float) -> SpreadingFunction:
    """``f(a, b) = a + b``; pass the graph's minimum edge weight as ``sigma``."""
    return SpreadingFunction("abf", _sum_rule, sigma=sigma, L1=1.0, L2=1.0)


def _mpp_rule(a, b, k):
    return 1.0 - (1.0 - a) * b


def most_probable_path(sigma: float) -> SpreadingFunction:
    """Failure probability along the most reliable path: ``1 - (1 - a) b``.

    Edge weights are delivery success rates in (0, 1). The margin
    ``f(a, b) - a = (1 - a)(1 - b)`` vanishes as ``a`` approaches 1, so the
    rule is only uniformly progressive on ``a <= a_max < 1``; callers pick
    ``sigma = (1 - a_max)(1 - b_max)``. Decreasing in ``b``.
    """
    return SpreadingFunction("mpp", _mpp_rule, sigma=sigma, L1=1.0, L2=1.0,
                             monotone_second=False, value_cap=1.0)


def check_probability_weights(g: Graph) -> None:
    for i, k, w in g.edges():
        if not 0.0 < w < 1.0:
            raise ValueError(f"mpp needs edge weights in (0, 1); edge ({i}, {k}) has {w}")


def hazard(radiation: Iterable[int], sigma: float, scale: float = 1000.0,
           exponent: float = 1.5, a_max: float = 1e3, b_max: float = 1.0) -> SpreadingFunction:
    """Exposure metric: plain distance, heavily penalized out of ``radiation`` nodes.

    ``f(a, b, k) = a + b`` when ``k`` is outside the zone, else
    ``h(a + scale * b)`` with ``h(y) = y**exponent`` for ``y > 1`` and ``y``
    otherwise. ``h`` is not globally Lipschitz; the reported constants hold
    on ``a <= a_max``, ``b <= b_max``.
    """
    zone = np.array(sorted(set(int(i) for i in radiation)), dtype=np.int64)

    def rule(a, b, k):
        hot = np.isin(k, zone)
        y = a + scale * b
        penal = np.where(y > 1.0, np.power(np.maximum(y, 1.0), exponent), y)
        return np.where(hot, penal, a + b)

    y_top = a_max + scale * b_max
    slope = max(1.0, exponent * y_top ** (exponent - 1.0))
    return SpreadingFunction(
        "hazard", rule, sigma=sigma, L1=scale * slope, L2=slope,
        params={"radiation": frozenset(zone.tolist()), "scale": scale, "exponent": exponent},
    )


NAMES = ("abf", "mpp", "hazard")


def for_graph(name: str, g: Graph, **params) -> SpreadingFunction:
    """Build a named function with constants resolved against ``g``."""
    if name == "abf":
        return abf_sum(g.e_min)
    if name == "mpp":
        check_probability_weights(g)
        a_max = params.get("a_max", 0.99)
        b_max = max(w for _, _, w in g.edges())
        return most_probable_path((1.0 - a_max) * (1.0 - b_max))
    if name == "hazard":
        return hazard(params.get("radiation", ()), g.e_min,
                      scale=params.get("scale", 1000.0), exponent=params.get("exponent", 1.5))
    raise ValueError(f"unknown spreading function {name!r}; expected one of {NAMES}")
