"""Compiled edge-block kernel.

Computes exactly what the numpy path in :mod:`rggeom.rgg` computes (same
keyed hash, same link rule) in one fused loop, which avoids the large
temporaries.  Importing this module fails cleanly when numba is missing, and
callers fall back to numpy.
"""

import math

import numba
import numpy as np

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)

FAMILY_CODES = {"exp_decay": 0, "affine": 1}


@numba.njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, parallel=False)
def edge_block(latents, rows, cols, key, family, a, b):
    out = np.empty((rows.shape[0], cols.shape[0]), dtype=np.bool_)
    dim = latents.shape[1]
    scale = 2.0 ** -53
    for ii in range(rows.shape[0]):
        i = rows[ii]
        for jj in range(cols.shape[0]):
            j = cols[jj]
            if i == j:
                out[ii, jj] = False
                continue
            s = 0.0
            for k in range(dim):
                t = latents[i, k] - latents[j, k]
                s += t * t
            dist = math.sqrt(s)
            if family == 0:
                p = a * math.exp(-b * dist)
            else:
                p = min(max(a - b * dist, 0.0), 1.0)
            lo = np.uint64(min(i, j))
            hi = np.uint64(max(i, j))
            h = _mix64(key ^ (lo * _GOLDEN))
            h = _mix64(h ^ (hi + _GOLDEN))
            u = (float(h >> np.uint64(11)) + 1.0) * scale
            out[ii, jj] = u <= p
    return out
