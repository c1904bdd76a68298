"""Named, independent random substreams derived from one master seed.

Each consumer (a sensor, a vehicle's trip draw, ...) gets its own generator
keyed by a stable name, so adding or removing one consumer never perturbs
the noise sequence of another.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _stable_key(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "big")


def substream(master_seed: int, name: str) -> np.random.Generator:
    """Generator for the substream `name` of `master_seed`."""
    seq = np.random.SeedSequence((int(master_seed) & 0xFFFFFFFFFFFFFFFF, _stable_key(name)))
    return np.random.Generator(np.random.PCG64(seq))
