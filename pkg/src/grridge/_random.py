"""Seed handling: every component draws from its own stream derived from one seed."""

import zlib

import numpy as np


def rng_for(seed, component):
    """Generator for ``component`` derived from the run ``seed``.

    The component name is hashed (CRC32) into the seed sequence entropy so that
    streams are independent of call order and thread scheduling.
    """
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(component.encode())]))
