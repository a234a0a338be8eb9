"""Named-purpose random streams derived from one root seed.

Every consumer asks for ``rng(root, "purpose", ...)``; the purpose string is
hashed into the seed sequence so adding a new consumer never shifts the
numbers drawn by an existing one.
"""
import zlib

import numpy as np


def derive_seed(root, *purpose):
    """Return a 64-bit integer seed for ``(root, *purpose)``."""
    return int(np.random.SeedSequence(_entropy(root, purpose)).generate_state(1, np.uint64)[0])


def rng(root, *purpose):
    """Independent :class:`numpy.random.Generator` for a named purpose."""
    return np.random.default_rng(np.random.SeedSequence(_entropy(root, purpose)))


def _entropy(root, purpose):
    words = [int(root) & 0xFFFFFFFF]
    for p in purpose:
        if isinstance(p, (int, np.integer)):
            words.append(int(p) & 0xFFFFFFFF)
        else:
            words.append(zlib.crc32(str(p).encode("utf-8")))
    return words
