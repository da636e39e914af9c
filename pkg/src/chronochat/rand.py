"""The one sanctioned randomness source.

Every sampling operation takes an explicit generator, so a whole session
replays bit-identically from its seed.
"""

from __future__ import annotations

import numpy as np


def seeded_rng(seed: int | None) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def choice_index(rng: np.random.Generator, probs: np.ndarray) -> int:
    """Draw an index from a probability vector via one uniform draw."""
    cum = np.cumsum(probs)
    u = rng.random() * cum[-1]
    return int(np.searchsorted(cum, u, side="right").clip(0, len(probs) - 1))
