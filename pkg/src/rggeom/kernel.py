"""The common-neighbour kernel ``K(x, y) = E_Z p(|x - Z|) p(|y - Z|)``.

Provides a Monte Carlo oracle (evaluation side), the graph estimator
``k_hat`` (observer side) and a numerical check of the kernel gap
inequality ``K(x,y) <= (K(x,x) + K(y,y))/2 - c1 min(|x-y|^2, r_M^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import manifold as mf
from .errors import DomainError
from .fileio import atomic_write
from .linkfn import LinkFunction, eval_link
from .streams import stream

MIN_SAMPLES = 100


@dataclass(frozen=True)
class KernelEstimate:
    value: float
    stderr: float
    samples: int


def _z_sample(model, samples: int, seed: int) -> np.ndarray:
    return mf.sample_points(model, stream(seed, "kernel-z"), samples)


def _estimate(values: np.ndarray) -> KernelEstimate:
    m = len(values)
    sd = float(np.std(values, ddof=1)) if m > 1 else 0.0
    return KernelEstimate(float(np.mean(values)), sd / math.sqrt(m), m)


def k_oracle(model: mf.ManifoldModel, link: LinkFunction, x, y, samples: int, seed: int) -> KernelEstimate:
    """Monte Carlo estimate of ``K(x, y)``; the Z sample depends only on seed."""
    if samples < MIN_SAMPLES:
        raise DomainError(f"need at least {MIN_SAMPLES} Monte Carlo samples")
    Z = _z_sample(model, samples, seed)
    px = eval_link(link, mf.euclidean_dist(Z, np.asarray(x)[None, :]))
    py = eval_link(link, mf.euclidean_dist(Z, np.asarray(y)[None, :]))
    return _estimate(px * py)


def k_hat(G, W, i: int, j: int) -> float:
    """Common-neighbour frequency ``|N_W(i) & N_W(j)| / |W|``."""
    if i == j:
        raise DomainError("k_hat needs two distinct vertices")
    W = np.asarray(W)
    return G.common_neighbor_count_in(i, j, W) / len(W)


def estimate_k_sup(model, link, seed: int, points: int = 1000, samples: int = 10_000) -> float:
    """Upper estimate of ``sup K``: max diagonal value plus three standard errors."""
    X = mf.sample_points(model, stream(seed, "ksup-points"), points)
    Z = _z_sample(model, samples, seed)
    best = 0.0
    for x in X:
        est = _estimate(eval_link(link, mf.euclidean_dist(Z, x[None, :])) ** 2)
        best = max(best, est.value + 3 * est.stderr)
    return min(best, 1.0)


def c1_bound(model, link) -> float:
    """Largest ``c1`` allowed by ``c1 <= ell_p^2 mu_min(r_M/4) / 800``."""
    return link.ell_p ** 2 * mf.mu_min(model, model.r_M / 4) / 800.0


@dataclass(frozen=True)
class GapRow:
    x_id: int
    y_id: int
    dist: float
    k_xy: float
    k_xx: float
    k_yy: float
    margin: float
    stderr: float
    flagged: bool


def sample_gap_pairs(model, pair_samples: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Half uniform pairs, half pairs closer than ``2 r_M`` (where the c1 term bites)."""
    rng = stream(seed, "gap-pairs")
    X = mf.sample_points(model, rng, pair_samples)
    Y = mf.sample_points(model, rng, pair_samples)
    close = np.arange(pair_samples) % 2 == 1
    for k in np.flatnonzero(close):
        frame = mf.tangent_frame(model, X[k])
        step = rng.standard_normal(model.d)
        step *= rng.uniform(0, 2 * model.r_M) / np.linalg.norm(step)
        Y[k] = mf.project(model, X[k] + step @ frame.basis)
    return X, Y


def k_gap_check(model, link, pair_samples: int, mc_samples: int, seed: int,
                c1: float | None = None) -> list[GapRow]:
    """Evaluate the kernel gap inequality on sampled pairs.

    All three kernel values share one Z sample, so the margin is the mean of
    ``(p_x - p_y)^2 / 2`` minus the c1 term and its standard error is that of
    the paired integrand.  A pair is flagged when the margin is below
    ``-3`` standard errors.
    """
    if c1 is None:
        c1 = c1_bound(model, link)
    X, Y = sample_gap_pairs(model, pair_samples, seed)
    Z = _z_sample(model, mc_samples, seed)
    rows = []
    for k in range(pair_samples):
        px = eval_link(link, mf.euclidean_dist(Z, X[k][None, :]))
        py = eval_link(link, mf.euclidean_dist(Z, Y[k][None, :]))
        dist = float(mf.euclidean_dist(X[k], Y[k]))
        gap = _estimate(0.5 * (px - py) ** 2)
        margin = gap.value - c1 * min(dist ** 2, model.r_M ** 2)
        rows.append(GapRow(
            x_id=2 * k, y_id=2 * k + 1, dist=dist,
            k_xy=float(np.mean(px * py)), k_xx=float(np.mean(px * px)), k_yy=float(np.mean(py * py)),
            margin=margin, stderr=gap.stderr, flagged=bool(margin < -3 * gap.stderr),
        ))
    return rows


def write_gap_report(rows: list[GapRow], path):
    lines = ["x_id,y_id,dist,k_xy,k_xx,k_yy,margin,flagged\n"]
    for r in rows:
        lines.append(
            f"{r.x_id},{r.y_id},{r.dist:.17g},{r.k_xy:.17g},{r.k_xx:.17g},"
            f"{r.k_yy:.17g},{r.margin:.17g},{int(r.flagged)}\n"
        )
    atomic_write(path, "".join(lines))
