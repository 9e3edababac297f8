"""Named random streams split deterministically from one master seed."""

import zlib

import numpy as np


def stream(seed, name):
    """Independent generator for the logical purpose ``name`` (e.g. "network", "data")."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))
