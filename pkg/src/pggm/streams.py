"""Derivation of independent, reproducible random streams.

Every stochastic routine in the package takes an explicit
``numpy.random.Generator``.  Streams are derived from a 64-bit master seed and
an integer key path, so a run is bit-reproducible given its seed and
independent workers (repetitions, chains, sweep blocks) never share a stream.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream"]


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator identified by ``(seed, *key)``.

    The same ``(seed, key)`` pair always yields the same stream, and distinct
    key paths yield statistically independent streams.
    """
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
