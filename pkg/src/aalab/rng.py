"""Counter-based per-path random streams.

Path ``m`` of a stream named ``generator_id`` under root seed ``seed`` draws
from a Philox generator whose key depends only on ``(seed, generator_id)``
and whose counter starts at ``m`` in its top word.  A path is therefore a
pure function of ``(seed, generator_id, m)``, independent of how many other
paths are generated or in which order.
"""

import zlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def _key(seed, generator_id):
    if not 0 <= int(seed) <= SEED_MASK:
        raise ValueError("seed must be a 64-bit unsigned integer")
    tag = zlib.crc32(str(generator_id).encode())
    return np.random.SeedSequence([int(seed), tag]).generate_state(2, np.uint64)


def path_generator(seed, generator_id, m):
    counter = np.array([0, 0, 0, int(m)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=_key(seed, generator_id), counter=counter))


def normals(seed, generator_id, M, shape, first=0):
    """Standard normals of shape ``(M, *shape)``; row ``i`` is path ``first + i``."""
    shape = tuple(shape)
    key = _key(seed, generator_id)
    out = np.empty((M,) + shape)
    counter = np.zeros(4, dtype=np.uint64)
    for i in range(M):
        counter[3] = first + i
        gen = np.random.Generator(np.random.Philox(key=key, counter=counter))
        out[i] = gen.standard_normal(shape)
    return out


def subsample(seed, generator_id, population, size):
    """Deterministic subset (sorted indices) of ``range(population)``."""
    if size >= population:
        return np.arange(population)
    gen = path_generator(seed, generator_id, 0)
    return np.sort(gen.choice(population, size=size, replace=False))
