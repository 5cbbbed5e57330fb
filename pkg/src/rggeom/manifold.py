"""Analytic embedded manifolds with exact geometric oracles.

Three models are built in: the circle of radius R in R^2, the round sphere of
radius R in R^3, and the flat (Clifford-type) torus
``(R cos t, R sin t, R cos f, R sin f)`` in R^4.  Points are plain numpy
arrays of ambient coordinates; batches are arrays of shape ``(m, N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ConfigError, DomainError

KINDS = ("circle", "sphere2", "flat_torus")
SURFACE_RTOL = 1e-12


@dataclass(frozen=True)
class TangentFrame:
    """Orthonormal basis (rows of ``basis``) of the tangent space at ``base``."""

    base: np.ndarray
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[0]


@dataclass(frozen=True)
class ManifoldModel:
    kind: str
    R: float = 1.0
    d: int = field(init=False)
    N: int = field(init=False)
    kappa: float = field(init=False)
    r_M0: float = field(init=False)
    diam_euc: float = field(init=False)
    diam_gd: float = field(init=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown manifold kind {self.kind!r}; expected one of {KINDS}")
        if not (self.R > 0 and math.isfinite(self.R)):
            raise ConfigError("scale R must be a positive finite length")
        R = float(self.R)
        set_ = object.__setattr__
        set_(self, "R", R)
        set_(self, "kappa", 1.0 / R)
        if self.kind == "circle":
            set_(self, "d", 1)
            set_(self, "N", 2)
            set_(self, "r_M0", math.inf)
            set_(self, "diam_euc", 2.0 * R)
            set_(self, "diam_gd", math.pi * R)
        elif self.kind == "sphere2":
            set_(self, "d", 2)
            set_(self, "N", 3)
            set_(self, "r_M0", math.inf)
            set_(self, "diam_euc", 2.0 * R)
            set_(self, "diam_gd", math.pi * R)
        else:
            # |x - y|^2 = 4R^2 (sin^2(dt/2) + sin^2(df/2)).  The sublevel set
            # {|x - y| < r} in angle coordinates is monotone in |dt| and |df|,
            # so it is connected as long as it does not wrap, i.e. for r < 2R.
            # R is a conservative lower bound on that radius.
            set_(self, "d", 2)
            set_(self, "N", 4)
            set_(self, "r_M0", R)
            set_(self, "diam_euc", 2.0 * math.sqrt(2.0) * R)
            set_(self, "diam_gd", math.sqrt(2.0) * math.pi * R)

    @classmethod
    def circle(cls, R: float = 1.0) -> "ManifoldModel":
        return cls("circle", R)

    @classmethod
    def sphere2(cls, R: float = 1.0) -> "ManifoldModel":
        return cls("sphere2", R)

    @classmethod
    def flat_torus(cls, R: float = 1.0) -> "ManifoldModel":
        return cls("flat_torus", R)

    @property
    def r_M(self) -> float:
        return 0.01 * min(1.0 / self.kappa, self.r_M0)

    @property
    def tag(self) -> str:
        return f"{self.kind}(R={self.R!r})"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "R": self.R}


def sample_points(model: ManifoldModel, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` points uniformly from the surface measure."""
    R = model.R
    if model.kind == "circle":
        t = rng.uniform(0.0, 2.0 * math.pi, size)
        return R * np.column_stack([np.cos(t), np.sin(t)])
    if model.kind == "sphere2":
        g = rng.standard_normal((size, 3))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return R * g
    ang = rng.uniform(0.0, 2.0 * math.pi, (size, 2))
    return torus_point(model, ang[:, 0], ang[:, 1])


def sample_point(model: ManifoldModel, rng: np.random.Generator) -> np.ndarray:
    return sample_points(model, rng, 1)[0]


def torus_point(model: ManifoldModel, theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    R = model.R
    return R * np.stack([np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)], axis=-1)


def _torus_angles(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.arctan2(p[..., 1], p[..., 0]), np.arctan2(p[..., 3], p[..., 2])


def on_surface(model: ManifoldModel, p: np.ndarray, rtol: float = SURFACE_RTOL) -> np.ndarray:
    """Boolean mask: does each point satisfy the defining equations?"""
    p = np.asarray(p, dtype=float)
    R = model.R
    if model.kind == "flat_torus":
        r1 = np.hypot(p[..., 0], p[..., 1])
        r2 = np.hypot(p[..., 2], p[..., 3])
        return (np.abs(r1 - R) <= rtol * R) & (np.abs(r2 - R) <= rtol * R)
    return np.abs(np.linalg.norm(p, axis=-1) - R) <= rtol * R


def project(model: ManifoldModel, p: np.ndarray) -> np.ndarray:
    """Nearest-point re-projection onto the surface (undoes arithmetic drift)."""
    p = np.asarray(p, dtype=float)
    R = model.R
    if model.kind == "flat_torus":
        a = p[..., 0:2] / np.linalg.norm(p[..., 0:2], axis=-1, keepdims=True)
        b = p[..., 2:4] / np.linalg.norm(p[..., 2:4], axis=-1, keepdims=True)
        return R * np.concatenate([a, b], axis=-1)
    return R * p / np.linalg.norm(p, axis=-1, keepdims=True)


def euclidean_dist(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(p, dtype=float) - np.asarray(q, dtype=float), axis=-1)


def geodesic_dist(model: ManifoldModel, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Exact intrinsic distance; broadcasts over leading axes."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    R = model.R
    if model.kind == "flat_torus":
        tp, fp = _torus_angles(p)
        tq, fq = _torus_angles(q)
        # |a - b| is exactly symmetric, so the wrapped distance is too
        dt = np.abs(tp - tq)
        dt = np.minimum(dt, 2 * math.pi - dt)
        df = np.abs(fp - fq)
        df = np.minimum(df, 2 * math.pi - df)
        return R * np.hypot(dt, df)
    # central angle via atan2 is accurate for both near and antipodal pairs
    chord = np.linalg.norm(p - q, axis=-1)
    anti = np.linalg.norm(p + q, axis=-1)
    return R * 2.0 * np.arctan2(chord, anti)


def mu_min(model: ManifoldModel, r: float) -> float:
    """Smallest surface measure of a Euclidean ball of radius ``r``.

    All built-in models are homogeneous, so this is the measure of the ball
    around any point.
    """
    if r < 0:
        raise DomainError("radius must be nonnegative")
    R = model.R
    if r >= model.diam_euc:
        return 1.0
    if model.kind == "circle":
        return 2.0 * math.asin(r / (2.0 * R)) / math.pi
    if model.kind == "sphere2":
        return r * r / (4.0 * R * R)
    return _torus_ball_measure(r / (2.0 * R))


def _torus_ball_measure(half_ratio: float) -> float:
    # ball {sin^2(a/2) + sin^2(b/2) < s} in the angle square [-pi, pi]^2
    s = half_ratio * half_ratio

    def width(a: float) -> float:
        rest = s - math.sin(a / 2.0) ** 2
        if rest <= 0.0:
            return 0.0
        if rest >= 1.0:
            return 2.0 * math.pi
        return 4.0 * math.asin(math.sqrt(rest))

    a_max = math.pi if s >= 1.0 else 2.0 * math.asin(math.sqrt(s))
    breaks = []
    if s > 1.0:
        breaks.append(2.0 * math.asin(math.sqrt(s - 1.0)))
    val, _ = integrate.quad(width, 0.0, a_max, points=breaks or None, epsabs=1e-13, epsrel=1e-12, limit=200)
    return min(1.0, 2.0 * val / (4.0 * math.pi ** 2))


def tangent_frame(model: ManifoldModel, p: np.ndarray) -> TangentFrame:
    p = np.asarray(p, dtype=float)
    if model.kind == "circle":
        u = p / np.linalg.norm(p)
        return TangentFrame(p, np.array([[-u[1], u[0]]]))
    if model.kind == "sphere2":
        n = p / np.linalg.norm(p)
        helper = np.zeros(3)
        helper[int(np.argmin(np.abs(n)))] = 1.0
        e1 = np.cross(n, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(n, e1)
        return TangentFrame(p, np.stack([e1, e2]))
    t, f = _torus_angles(p)
    basis = np.array([
        [-math.sin(t), math.cos(t), 0.0, 0.0],
        [0.0, 0.0, -math.sin(f), math.cos(f)],
    ])
    return TangentFrame(p, basis)


def normal_frame(model: ManifoldModel, p: np.ndarray) -> np.ndarray:
    """Orthonormal rows spanning the normal space at ``p``."""
    p = np.asarray(p, dtype=float)
    if model.kind == "flat_torus":
        t, f = _torus_angles(p)
        return np.array([
            [math.cos(t), math.sin(t), 0.0, 0.0],
            [0.0, 0.0, math.cos(f), math.sin(f)],
        ])
    return (p / np.linalg.norm(p))[None, :]


def subspace_distance(A: TangentFrame, B: TangentFrame) -> float:
    """Largest singular value of B's basis projected off the span of A."""
    if A.dim != B.dim:
        raise DomainError("frames must have equal dimension")
    residual = B.basis - (B.basis @ A.basis.T) @ A.basis
    return float(min(1.0, np.linalg.norm(residual, 2)))


def sphere_chart(model: ManifoldModel, p: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Surface point lying over the tangent vector ``v`` at ``p`` (sphere only).

    This is the exact local inverse of the orthogonal projection onto the
    tangent plane at ``p``, defined for ``|v| < R``.
    """
    if model.kind != "sphere2":
        raise DomainError("chart is implemented for sphere2 only")
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    R = model.R
    nv = float(np.linalg.norm(v))
    if nv >= R:
        raise DomainError("tangent vector must be shorter than the radius")
    return v + (p / np.linalg.norm(p)) * math.sqrt(R * R - nv * nv)
