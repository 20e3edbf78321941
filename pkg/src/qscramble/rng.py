"""Deterministic per-task random streams.

Streams are built on numpy's counter-based Philox generator, keyed by a
user seed plus an index tuple (start index, repeat index, ...).  The same
(seed, key) always yields the same stream, independent of how many other
streams were drawn from or in what order, so parallel and serial
execution produce identical results.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent Generator for the given (seed, key...) coordinates."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))
