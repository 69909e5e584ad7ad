"""Counter-based random streams derived from an integer seed."""

import numpy as np


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Philox generator for the stream (seed, *keys); distinct keys give independent streams."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
