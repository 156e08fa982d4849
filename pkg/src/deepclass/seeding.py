"""Named, order-independent RNG substreams.

Every source of randomness in the pipeline (weight init, shuffling, the
eval split) draws from its own stream derived from the single top-level
seed plus a string label, so changing one consumer never perturbs another.
"""

import hashlib

import numpy as np


def derive_seed(seed: int, *labels) -> int:
    """Map (seed, labels...) to a 64-bit stream seed via SHA-256."""
    h = hashlib.sha256()
    h.update(str(int(seed)).encode())
    for label in labels:
        h.update(b"\x00")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:8], "little")


def substream(seed: int, *labels) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *labels))
