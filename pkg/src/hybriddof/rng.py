"""Deterministic counter-based random streams.

Every stochastic quantity in the renderer (lens samples, ground-truth
sampling) is drawn from a splitmix64 hash of (seed, frame, pixel, counter),
so results depend only on those keys: no global state, no dependence on
evaluation order or worker count.
"""

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / (1 << 53)


def splitmix64(x):
    """Finalizer of the splitmix64 generator, applied elementwise."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = x + _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def hash_u64(*parts):
    """Chain-hash integer keys (scalars or broadcastable arrays) to uint64."""
    h = np.uint64(0)
    for p in parts:
        h = splitmix64(h ^ np.asarray(p, dtype=np.uint64))
    return h


def uniform01(*parts):
    """Uniform floats in [0, 1) keyed by the given integers (53-bit mantissa)."""
    return (hash_u64(*parts) >> np.uint64(11)).astype(np.float64) * _INV53
