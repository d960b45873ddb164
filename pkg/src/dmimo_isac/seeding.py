"""Splittable seed derivation.

Every random draw in the package comes from a generator built by
:func:`rng_for`, keyed by the master seed and a path of integers
(stream tag, trial index, ...). A child seed is obtained by folding each path
element into the running state with ``state = splitmix64(state ^ element)``,
so the stream for trial ``i`` depends only on ``(master, tag, i)`` and never
on the order in which trials are executed.
"""

import numpy as np

MASK64 = (1 << 64) - 1

# stream tags
DEPLOYMENT = 0x01
BLOCKAGE = 0x02
SHADOWING = 0x03
FADING = 0x04
MEASUREMENT = 0x05
REALIZATION = 0x06
GEOMETRY = 0x07


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def child_seed(master: int, *path: int) -> int:
    """Derive a 64-bit seed from ``master`` and an index path."""
    if not 0 <= master <= MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {master}")
    state = master
    for element in path:
        state = splitmix64(state ^ (int(element) & MASK64))
    return state


def rng_for(master: int, *path: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(child_seed(master, *path)))


def as_rng(seed) -> np.random.Generator:
    """Accept a Generator or an integer seed."""
    if isinstance(seed, np.random.Generator):
        return seed
    return rng_for(int(seed))
