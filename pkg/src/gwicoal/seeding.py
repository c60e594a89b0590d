"""Deterministic stream derivation for parallel replicates.

Every consumer owns a substream keyed by (master seed, domain tag, index), so
reported values never depend on worker scheduling or thread count.
"""

from __future__ import annotations

import numpy as np

FOREST_STREAM = 0
CLAN_STREAM = 1
LIMIT_STREAM = 2
PLAIN_STREAM = 3


def substream(seed: int, tag: int, index: int) -> np.random.Generator:
    """Return the generator owned by (seed, tag, index)."""
    return np.random.default_rng((int(seed), int(tag), int(index)))
