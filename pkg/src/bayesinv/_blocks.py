"""Fixed-size particle blocks for seeding and threaded evaluation.

Work is always cut into blocks of ``BLOCK`` particles regardless of the
thread count, and each block draws from its own stream derived from
``(seed, block index)``.  Results therefore do not depend on how many
workers process the blocks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK = 4096


def block_slices(M, block=BLOCK):
    return [slice(s, min(s + block, M)) for s in range(0, M, block)]


def block_rng(seed, index, stream=0):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), int(index)]))


def block_normals(seed, M, shape, stream=0):
    """(M, *shape) standard normals, block-seeded."""
    shape = (int(shape),) if np.ndim(shape) == 0 else tuple(int(d) for d in shape)
    out = np.empty((M,) + shape)
    for b, sl in enumerate(block_slices(M)):
        out[sl] = block_rng(seed, b, stream).standard_normal((sl.stop - sl.start,) + shape)
    return out


def map_blocks(fn, M, threads=1):
    """Evaluate ``fn(slice)`` over fixed blocks and concatenate in order."""
    slices = block_slices(M)
    if threads is None or threads <= 1 or len(slices) == 1:
        parts = [fn(sl) for sl in slices]
    else:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            parts = list(pool.map(fn, slices))
    return np.concatenate(parts, axis=0)
