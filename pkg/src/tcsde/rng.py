"""Counter-based random streams.

Every stream is a Philox generator keyed by a ``SeedSequence`` whose spawn key
encodes the caller's coordinates (path index, role, ...). Streams are therefore
independent of evaluation order and of the number of worker threads.
"""

import numpy as np

# Roles of the child streams of one Monte Carlo path.
SUBORDINATOR = 0
BROWNIAN = 1


def stream(seed, *key):
    """Return a Philox generator for ``seed`` at spawn coordinates ``key``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def path_streams(seed, path_index, *extra):
    """Return ``(subordinator_rng, brownian_rng)`` for one trajectory."""
    return (
        stream(seed, path_index, *extra, SUBORDINATOR),
        stream(seed, path_index, *extra, BROWNIAN),
    )
