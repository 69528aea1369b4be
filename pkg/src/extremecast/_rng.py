"""Seeded random streams.

Every sampling routine takes an explicit integer seed. Sub-streams are keyed
by ``numpy.random.SeedSequence`` spawn keys so that a slice or block gets the
same draws whether it is processed alone, serially, or on another worker.
Normal variates come from ``Generator.standard_normal`` (ziggurat method) on
a PCG64 bit generator.
"""

import numpy as np


def stream(seed, *key):
    """Return an independent PCG64 generator for ``(seed, *key)``."""
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
