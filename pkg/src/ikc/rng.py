"""Keyed random streams.

Every stochastic step draws from a generator keyed on the identity of the
work unit (master seed plus an arbitrary tuple of ints/strings), never on
execution order, so results do not depend on scheduling.

The bit generator is Philox-4x64 (counter-based); keys are folded into the
seed through ``numpy.random.SeedSequence``.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (bool, np.bool_)):
        return int(key)
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"stream keys must be non-negative, got {key}")
        return int(key)
    if isinstance(key, float):
        # noise levels etc.; fixed-precision so 0.1 and 0.1000000001 differ
        return zlib.crc32(f"{key:.12g}".encode())
    return zlib.crc32(str(key).encode())


def stream(seed: int, *keys) -> np.random.Generator:
    """Return an independent generator for the work unit ``(seed, *keys)``."""
    entropy = [_key_to_int(seed)] + [_key_to_int(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
