"""Named RNG streams: every source of randomness derives from one seed.

A stream is addressed by a tuple of small integers (purpose id, indices...).
Two distinct addresses never collide, and the generator for an address is a
pure function of (seed, address), so results do not depend on scheduling
order or on how work is split across threads.
"""

import numpy as np

# purpose ids
WALK_CHAIN = 0
RADIAL = 1
SUPPORT = 2
STAGE = 3
PROBE = 4


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream addressed by ``key`` under master ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def child_seed(seed: int, *key: int) -> int:
    """A derived 63-bit integer seed for components that take a plain seed."""
    state = np.random.SeedSequence(seed, spawn_key=key).generate_state(2, np.uint64)
    return int(state[0] >> np.uint64(1))
