"""Distance-to-probability link functions.

A link maps a Euclidean distance ``t >= 0`` to an edge probability.  Two
families are built in:

* ``exp_decay(a, b)``: ``t -> a * exp(-b t)``
* ``affine(a, b)``:    ``t -> a - b t``, clamped to ``[0, 1]``

``D`` is the domain bound (at least the Euclidean diameter of the manifold);
the certified constants refer to the interval ``[0, 2D]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError

FAMILIES = ("exp_decay", "affine")
BISECT_TOL = 1e-12
BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class LinkFunction:
    family: str
    a: float
    b: float
    D: float
    L_p: float = field(init=False)
    ell_p: float = field(init=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown link family {self.family!r}")
        if not self.D > 0:
            raise ConfigError("domain bound D must be positive")
        if self.family == "exp_decay":
            if not (0 < self.a <= 1 and self.b > 0):
                raise ConfigError("exp_decay needs 0 < a <= 1 and b > 0")
        else:
            # b = 0 gives the constant link, allowed only as a test device
            if not (0 <= self.a <= 1 and self.b >= 0 and self.a - 2 * self.D * self.b >= 0):
                raise ConfigError("affine link must stay in [0, 1] on [0, 2D]")
        L_p, ell_p = certify_constants(self, self.D)
        object.__setattr__(self, "L_p", L_p)
        object.__setattr__(self, "ell_p", ell_p)

    @classmethod
    def exp_decay(cls, a: float, b: float, D: float = 2.0) -> "LinkFunction":
        return cls("exp_decay", float(a), float(b), float(D))

    @classmethod
    def affine(cls, a: float, b: float, D: float = 2.0) -> "LinkFunction":
        return cls("affine", float(a), float(b), float(D))

    @property
    def tag(self) -> str:
        return f"{self.family}(a={self.a!r}, b={self.b!r}, D={self.D!r})"

    def to_dict(self) -> dict:
        return {"family": self.family, "a": self.a, "b": self.b, "D": self.D}

    def __call__(self, t):
        return eval_link(self, t)


def eval_link(f: LinkFunction, t):
    """Edge probability at distance ``t`` (scalar or array)."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("link function is defined for t >= 0 only")
    if f.family == "exp_decay":
        out = f.a * np.exp(-f.b * arr)
    else:
        out = np.clip(f.a - f.b * arr, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def inverse(f: LinkFunction, y):
    """Distance whose link value is ``y``, clamped to ``[0, 2D]``.

    Values above ``p(0)`` map to 0 and values below ``p(2D)`` map to ``2D``.
    """
    arr = np.asarray(y, dtype=float)
    top = eval_link(f, 0.0)
    bottom = eval_link(f, 2 * f.D)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if f.family == "exp_decay":
            t = np.log(f.a / arr) / f.b
        elif f.b > 0:
            t = (f.a - arr) / f.b
        else:
            t = np.zeros_like(arr)
    t = np.where(arr >= top, 0.0, np.where(arr <= bottom, 2 * f.D, t))
    t = np.clip(t, 0.0, 2 * f.D)
    return float(t) if t.ndim == 0 else t


def bisect_inverse(f: LinkFunction, y: float) -> float:
    """Family-agnostic inverse by monotone bisection on ``[0, 2D]``.

    Same clamping contract as :func:`inverse`; used for families without a
    closed form and as a cross-check for the built-in ones.
    """
    lo, hi = 0.0, 2 * f.D
    if y >= eval_link(f, lo):
        return lo
    if y <= eval_link(f, hi):
        return hi
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if eval_link(f, mid) > y:
            lo = mid
        else:
            hi = mid
        if hi - lo <= BISECT_TOL:
            break
    return 0.5 * (lo + hi)


def certify_constants(f: LinkFunction, D: float) -> tuple[float, float]:
    """``(L_p, ell_p)``: largest and smallest slope magnitude on ``[0, 2D]``."""
    if not D > 0:
        raise DomainError("D must be positive")
    if f.family == "exp_decay":
        return f.a * f.b, f.a * f.b * math.exp(-2 * f.b * D)
    return f.b, f.b
