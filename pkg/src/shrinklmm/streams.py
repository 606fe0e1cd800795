"""Counter-based RNG streams for reproducible parallel simulation.

Every simulation replicate gets its own Philox stream addressed by
(master seed, path indices).  Streams are independent and the mapping is
pure, so results do not depend on execution order or thread count.
"""
import numpy as np

# Each path component owns a 2**64 span of the 256-bit Philox counter, so a
# single stream may draw up to 2**64 blocks before touching its neighbour.
_MAX_PATH = 3


def replicate_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Return the generator for one replicate.

    Parameters
    ----------
    master_seed : int
        Study-level seed.
    *path : int
        Up to three nonnegative indices (e.g. grid cell, replicate) that
        address the stream.  Distinct paths give disjoint counter blocks.
    """
    if len(path) > _MAX_PATH:
        raise ValueError(f"at most {_MAX_PATH} path components, got {len(path)}")
    key = np.random.SeedSequence(int(master_seed)).generate_state(2, dtype=np.uint64)
    counter = np.zeros(4, dtype=np.uint64)
    for i, idx in enumerate(path):
        idx = int(idx)
        if idx < 0:
            raise ValueError("path indices must be nonnegative")
        counter[1 + i] = idx
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
