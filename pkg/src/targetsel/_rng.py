"""Deterministic random-stream derivation.

Every source of randomness in the package is a ``numpy.random.Generator``
keyed by a tuple of nonnegative integers.  Streams derived from distinct key
tuples are statistically independent (``SeedSequence`` hashing), and a given
key tuple always yields the same stream, on any platform and regardless of
how work is scheduled across processes.
"""

from __future__ import annotations

import numpy as np

# Fixed salts so different pipeline stages never share a stream even when the
# remaining key components coincide.
STAGE_GENERATE = 0
STAGE_BOOTSTRAP = 1
STAGE_FOLDS = 2
STAGE_CI = 3
STAGE_INNER = 4


def seed_sequence(*keys: int) -> np.random.SeedSequence:
    for k in keys:
        if k < 0:
            raise ValueError(f"stream keys must be nonnegative, got {k}")
    return np.random.SeedSequence(list(keys))


def stream(*keys: int) -> np.random.Generator:
    """Generator for the stream identified by ``keys``."""
    return np.random.default_rng(seed_sequence(*keys))


def derive_seed(*keys: int) -> int:
    """Collapse a key tuple into a single 64-bit seed (for nested plans)."""
    return int(seed_sequence(*keys).generate_state(1, np.uint64)[0])
