"""Counter-based uniform draws keyed on integer tuples.

Every draw is a pure function of its key, so replays, parallel trials and
out-of-order queries all see the same numbers without storing samples.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_U64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def hash_keys(*keys) -> np.ndarray:
    """Hash broadcastable integer keys to uint64 words."""
    arrays = []
    for k in keys:
        a = np.asarray(k)
        if a.dtype != np.uint64:
            a = a.astype(np.int64).astype(np.uint64)
        arrays.append(a)
    with np.errstate(over="ignore"):
        h = np.zeros(np.broadcast_shapes(*(a.shape for a in arrays)), dtype=np.uint64)
        for a in arrays:
            h = _mix(h + _GOLDEN + a)
    return h


def uniform(*keys) -> np.ndarray:
    """Uniform [0, 1) doubles, one per broadcast key position."""
    h = hash_keys(*keys)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def seed_word(seed: int) -> int:
    if not 0 <= seed <= _U64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed
