"""Seeding helpers.

Every run gets its own generator.  Child streams are derived from a master
seed with ``numpy.random.SeedSequence(master).spawn(k)``; stream ``i`` is the
``i``-th child, so results do not depend on how runs are split across workers.
"""
import numpy as np


def make_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def child_seeds(seed, k):
    """Return ``k`` independent integer seeds derived from ``seed``."""
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in ss.spawn(k)]
