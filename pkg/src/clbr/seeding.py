"""Named sub-seeds derived from one master seed.

``derive_seed(master, name)`` is the first 8 bytes (big-endian) of
``sha256(f"{master}/{name}")``, so every stage or stream gets a stable,
independent 64-bit seed and renaming one never shifts another.
"""

import hashlib

import numpy as np


def derive_seed(master: int, name: str) -> int:
    digest = hashlib.sha256(f"{int(master)}/{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def rng_for(master: int, name: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, name))
