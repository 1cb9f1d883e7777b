"""Deterministic random-stream derivation.

Every stochastic routine in this package draws from a stream addressed by
an integer seed plus a tuple key, e.g. ``(replicate, attempt)``.  Streams
for distinct keys are statistically independent and, crucially, do not
depend on the order in which they are created or consumed, so replicates
can be farmed out to any number of workers and still reproduce bit-exactly.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream", "derive_seed"]


def _seed_sequence(seed: int, key: tuple[int, ...]) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for stream ``key`` under ``seed``."""
    return np.random.Generator(np.random.PCG64(_seed_sequence(seed, key)))


def derive_seed(seed: int, *key: int) -> int:
    """Integer sub-seed for handing a whole stream family to a callee."""
    return int(_seed_sequence(seed, key).generate_state(1, np.uint64)[0])
