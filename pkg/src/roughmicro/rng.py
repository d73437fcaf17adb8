"""Reproducible, splittable random streams.

Every Monte Carlo replication draws from its own Philox (counter-based)
generator keyed by ``(master_seed, *tags, index)``, so results do not depend
on how replications are distributed over workers.
"""

import numpy as np


def stream(master_seed, *path):
    """Return the generator addressed by ``master_seed`` and an integer path."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def replication_streams(master_seed, start, stop, *tags):
    """Yield ``(index, generator)`` for replications ``start..stop-1``."""
    for i in range(start, stop):
        yield i, stream(master_seed, *tags, i)


def block_ranges(count, block_size):
    """Split ``range(count)`` into consecutive ``(start, stop)`` blocks."""
    block_size = max(1, int(block_size))
    return [(s, min(s + block_size, count)) for s in range(0, count, block_size)]
