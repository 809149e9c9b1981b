"""Counter-based random streams.

Streams are derived from a 64-bit master seed and a 64-bit stream index by
keying a Philox-4x64 counter-based generator with the pair
``key = (seed mod 2^64, index mod 2^64)``.  Philox produces independent,
non-overlapping streams for distinct keys by construction, so the pair
(seed, index) fully determines every draw: the same pair reproduces the
same stream across runs, processes, and thread counts.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, index: int) -> np.random.Generator:
    """Return the Generator for stream `index` under master seed `seed`."""
    key = np.array([seed & _MASK64, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
