"""Counter-based random streams.

Every random draw in the engine comes from a Philox generator keyed by a
tuple of integers, so a stream depends only on *what* it is for (particle
slot, observation index, purpose) and never on the order in which work is
scheduled.
"""
import numpy as np

# stream purposes
PARTICLE = 0
RESAMPLE = 1
PREDICT = 2
INIT = 3


def stream(seed, *key):
    """Return an independent generator for ``(seed, *key)``.

    >>> a = stream(7, PARTICLE, 3, 10).random()
    >>> b = stream(7, PARTICLE, 3, 10).random()
    >>> a == b
    True
    """
    words = [int(seed)] + [int(k) for k in key]
    if any(w < 0 for w in words):
        raise ValueError("stream keys must be non-negative integers")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))
