"""Seeded random streams.

Every stream is NumPy's PCG64 (the 128-bit-state permuted congruential
generator, XSL-RR output) seeded through ``SeedSequence`` with a 64-bit
integer. Keyed streams hash their key with BLAKE2b, so the same
``(seed, key)`` gives the same draws on any platform and under any scheduling
of configurations.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from an arbitrary tuple of printable parts."""
    text = "\x1f".join(repr(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def make_rng(seed: int, *key) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seeds are unsigned integers")
    if not key:
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *key)))
