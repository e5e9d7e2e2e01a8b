"""Seeded random streams.

Every source of randomness in the toolkit is a named substream derived from
(experiment seed, purpose tag), so independent components never share or
steal draws from each other. The generator family is NumPy's PCG64; streams
are reproducible across runs on the same library versions, which is the
contract (cross-language bit equality is not).
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _tag_entropy(tag) -> int:
    digest = hashlib.sha256(repr(tag).encode("utf8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, *tags) -> np.random.Generator:
    """Return an independent generator for the given seed and purpose tags.

    Tags may be strings or integers; distinct tag tuples give statistically
    independent streams for the same seed.
    """
    entropy = [int(seed) & _MASK64]
    entropy.extend(_tag_entropy(t) for t in tags)
    return np.random.default_rng(np.random.SeedSequence(entropy))
