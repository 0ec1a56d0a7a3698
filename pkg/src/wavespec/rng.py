"""Counter-based, splittable random streams.

Every stochastic operation takes an explicit ``numpy.random.Generator``.
Streams for Monte Carlo replicates are derived from ``(seed, *keys)`` through
``SeedSequence`` spawn keys and drive a Philox counter-based bit generator, so
replicate ``r`` draws the same numbers no matter which worker runs it.
"""
from __future__ import annotations

import numpy as np

SEED_MAX = 2**64 - 1


def derive(seed: int, *keys: int) -> np.random.Generator:
    """Return the child stream of ``seed`` addressed by ``keys``."""
    if not 0 <= int(seed) <= SEED_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
