"""Counter-based Gaussian noise, reproducible independent of work division.

Each stream is a Philox generator keyed by (master seed, spawn key); the
value at lattice index k is a pure function of the key and k, so any window
of any realization can be regenerated exactly, in any order, on any number
of workers.  One 64-bit raw word feeds one Gaussian via the inverse normal
CDF, keeping the counter-to-value mapping fixed (ziggurat-style samplers
consume a variable number of words and would break it).
"""

from __future__ import annotations

import numpy as np
from numpy.random import Philox, SeedSequence
from scipy.special import ndtri

_WORDS_PER_BLOCK = 4        # Philox emits 4 64-bit words per counter tick
_INDEX_OFFSET = 1 << 48     # shifts lattice indices into nonnegative counter space


def _raw_words(master_seed, spawn_key: tuple, start: int, count: int) -> np.ndarray:
    if count < 0:
        raise ValueError("count must be nonnegative")
    if start < 0:
        raise ValueError("absolute stream index underflow; raise the index offset")
    bg = Philox(seed=SeedSequence(master_seed, spawn_key=tuple(int(s) for s in spawn_key)))
    block, lead = divmod(start, _WORDS_PER_BLOCK)
    if block:
        bg.advance(block)
    return bg.random_raw(count + lead)[lead:]


def normal_stream(master_seed, spawn_key: tuple, k_start: int, count: int) -> np.ndarray:
    """Standard Gaussians xi(k) for k = k_start .. k_start + count - 1."""
    raw = _raw_words(master_seed, spawn_key, k_start + _INDEX_OFFSET, count)
    # map to the open interval (0, 1) at double precision, then invert the CDF
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)
