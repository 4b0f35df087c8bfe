"""Counter-based random streams.

Every Monte Carlo routine draws from ``stream(seed, index)``: a Philox
generator keyed by the pair ``(seed, index)``.  Work split into chunks uses
one index per chunk, so results depend only on ``(seed, n)`` and never on
how many workers ran the chunks.
"""

from __future__ import annotations

import numpy as np

CHUNK = 1 << 18


def stream(seed: int, index: int = 0) -> np.random.Generator:
    if seed is None:
        raise ValueError("an explicit integer seed is required")
    seed = int(seed)
    index = int(index)
    if seed < 0 or index < 0:
        raise ValueError("seed and stream index must be non-negative")
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def chunks(n: int, size: int = CHUNK):
    """Yield ``(index, count)`` pairs covering ``n`` samples in fixed-size blocks."""
    index = 0
    done = 0
    while done < n:
        count = min(size, n - done)
        yield index, count
        index += 1
        done += count
