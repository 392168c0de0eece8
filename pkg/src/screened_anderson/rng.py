"""Counter-based random streams for reproducible parallel Monte Carlo.

Every consumer of randomness draws from a stream keyed by
``(master_seed, purpose_tag, index)``.  The key is hashed into a
SeedSequence feeding a Philox counter-based generator, so identical keys
produce identical draws no matter how trials are scheduled across
workers.  Batch loops key their streams by batch index with a fixed
batch size, which keeps outputs byte-identical for any thread count.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1

#: Fixed number of trials drawn per stream in batched Monte Carlo loops.
BATCH_SIZE = 1024


def tag_to_int(tag: str) -> int:
    """Stable 64-bit integer derived from a purpose tag (not salted)."""
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream(master_seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Generator for the stream keyed by (master_seed, tag, index)."""
    entropy = (int(master_seed) & _MASK64, tag_to_int(tag), int(index) & _MASK64)
    seq = np.random.SeedSequence(entropy=entropy)
    return np.random.Generator(np.random.Philox(seq))


def batch_bounds(total: int, batch_size: int = BATCH_SIZE) -> list[tuple[int, int, int]]:
    """Split ``total`` trials into (batch_index, start, stop) ranges."""
    out = []
    start = 0
    index = 0
    while start < total:
        stop = min(start + batch_size, total)
        out.append((index, start, stop))
        start = stop
        index += 1
    return out
