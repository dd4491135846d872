"""Counter-based random streams.

Every stochastic quantity is drawn from a Philox generator keyed by the
master seed plus a tuple of integers or strings (e.g. ``("ue", 3,
"snapshot", 17)``), so results do not depend on evaluation order or on
how work is split between workers.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream keys must be non-negative")
        return int(part)
    return zlib.crc32(str(part).encode())


def substream(seed: int, *keys) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
