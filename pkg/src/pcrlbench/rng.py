"""Deterministic RNG substreams derived from one master seed.

Every stochastic stage derives its generators through ``substream`` with a
fixed integer key path, e.g. ``(STREAM_ENSEMBLE, trajectory_index)``.  The
stream a consumer receives therefore depends only on the master seed and the
key, never on execution order or worker count.
"""

from __future__ import annotations

import numpy as np

# Top-level stream ids, one per stage that consumes randomness.
STREAM_ENSEMBLE = 0
STREAM_IDENTIFY = 1
STREAM_REFERENCE = 2
STREAM_INPUT = 3
STREAM_AUX = 4


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for the substream at ``key`` under ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))
