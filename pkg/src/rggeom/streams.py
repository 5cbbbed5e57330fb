"""Seeded randomness: named sequential streams and pair-keyed variates.

Sequential streams are numpy Generators derived from ``(seed, name)`` so
every consumer draws from its own reproducible stream.  Pair variates are a
stateless hash of ``(seed, min(i, j), max(i, j))``: the value for a pair does
not depend on which other pairs were evaluated or in what order.
"""

from __future__ import annotations

import logging
import zlib

import numpy as np

log = logging.getLogger(__name__)

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_M53 = 2.0 ** -53


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for the stream ``name`` under ``seed``."""
    key = zlib.crc32(name.encode("utf-8"))
    log.debug("stream %s seed=%d key=%d", name, seed, key)
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, key])


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _seed_key(seed: int) -> np.uint64:
    z = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64(z + _GOLDEN)[0]


def pair_uniforms(seed: int, i, j) -> np.ndarray:
    """Uniform variates in (0, 1] keyed on ``(seed, min(i,j), max(i,j))``.

    ``i`` and ``j`` broadcast against each other.  The result is symmetric in
    the two indices by construction.
    """
    i = np.asarray(i, dtype=np.uint64)
    j = np.asarray(j, dtype=np.uint64)
    lo = np.minimum(i, j)
    hi = np.maximum(i, j)
    with np.errstate(over="ignore"):
        h = _mix64(_seed_key(seed) ^ (lo * _GOLDEN))
        h = _mix64(h ^ (hi + _GOLDEN))
    return ((h >> _S11).astype(np.float64) + 1.0) * _TWO_M53
