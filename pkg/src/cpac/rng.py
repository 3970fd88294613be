"""Named deterministic random substreams derived from one run seed."""

import zlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """A generator whose stream depends only on (seed, name).

    crc32 keys the substream instead of hash() so streams are stable
    across interpreter runs.
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(key,)))
