"""Distance estimates, the weighted graphs Gamma(G, r) and the measure nu.

Given a cluster net, each center ``u_s`` gets a companion cluster ``U'_s``
drawn from a fresh batch.  The neighbour ratio of any vertex into ``U'_s``,
pushed through the inverse link, estimates its distance to ``u_s``.  These
estimates define a weighted graph on the vertices: centers are joined when
their estimated distance is at most ``rule_r`` (weight estimate + 0.04
delta) and every other vertex hangs off one center with weight delta.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import manifold as mf
from .clusternet import ClusterNet, _latents
from .errors import ConfigError, DomainError
from .fileio import atomic_write, dump_json
from .linkfn import LinkFunction, eval_link, inverse
from .streams import stream

EDGE_OFFSET = 0.04


def extract_companion_clusters(G, net: ClusterNet, fresh_batches, ps, link: LinkFunction) -> list[np.ndarray]:
    """``U'_s``: vertices of batch ``s`` whose ratio into ``U_s`` is at least ``p(1.5 eta)``."""
    if len(fresh_batches) < len(net):
        raise ConfigError(f"need {len(net)} fresh batches, got {len(fresh_batches)}")
    thr = eval_link(link, 1.5 * ps.eta)
    out = []
    for c, batch in zip(net.clusters, fresh_batches):
        batch = np.asarray(batch, dtype=np.int64)
        out.append(batch[G.neighbor_ratios(batch, c.members) >= thr])
    return out


def estimate_center_distance(G, v: int, companion, link: LinkFunction) -> float:
    """Inverse link of the neighbour ratio of ``v`` into ``companion``."""
    companion = np.asarray(companion, dtype=np.int64)
    if len(companion) == 0:
        raise DomainError("empty companion cluster")
    return inverse(link, G.neighbor_count_in(v, companion) / len(companion))


def estimate_distances(G, vertices, companions, link: LinkFunction) -> np.ndarray:
    """Matrix of distance estimates, rows ``vertices``, columns centers.

    An empty companion cluster yields an ``inf`` column (no estimate).
    """
    vertices = np.asarray(vertices, dtype=np.int64)
    out = np.full((len(vertices), len(companions)), np.inf)
    for s, comp in enumerate(companions):
        if len(comp):
            out[:, s] = inverse(link, G.neighbor_ratios(vertices, comp))
    return out


@dataclass
class WeightedGraph:
    """Reconstructed graph: a center graph plus one pendant edge per other vertex.

    ``center_weights[i, j]`` is the edge weight between centers ``i`` and
    ``j`` (``inf`` when absent).  ``attach[k]`` is the center index of
    ``vertices[k]`` (its own index for a center).
    """

    vertices: np.ndarray
    centers: np.ndarray
    center_weights: np.ndarray
    attach: np.ndarray
    is_center: np.ndarray
    rule_r: float
    delta: float
    center_estimates: np.ndarray | None = field(default=None, repr=False)
    _apsp: np.ndarray | None = field(default=None, repr=False)
    _pos: dict | None = field(default=None, repr=False)

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        out = []
        L = len(self.centers)
        for i in range(L):
            for j in range(i + 1, L):
                w = self.center_weights[i, j]
                if math.isfinite(w):
                    out.append((int(self.centers[i]), int(self.centers[j]), float(w)))
        for v, s, c in zip(self.vertices, self.attach, self.is_center):
            if not c:
                out.append((int(v), int(self.centers[s]), float(self.delta)))
        return out

    def position(self, v: int) -> int:
        if self._pos is None:
            self._pos = {int(x): k for k, x in enumerate(self.vertices)}
        return self._pos[int(v)]

    def leaf_weight(self, k) -> np.ndarray:
        return np.where(self.is_center[k], 0.0, self.delta)

    def center_distances(self) -> np.ndarray:
        """All-pairs shortest path lengths on the center graph (cached)."""
        if self._apsp is None:
            self._apsp = np.vstack([
                _dijkstra_dense(self.center_weights, s) for s in range(len(self.centers))
            ]) if len(self.centers) else np.zeros((0, 0))
        return self._apsp

    def triangle_closed(self) -> bool:
        """Does every direct center edge already realize the shortest path?"""
        W = self.center_weights
        return bool(np.all(self.center_distances() >= W - 1e-15 * np.maximum(1, np.abs(W))) or not len(W))

    def to_text(self) -> str:
        lines = [f"# gamma rule_r={self.rule_r!r} delta={self.delta!r}\n"]
        lines.extend(f"{i} {j} {w:.17g}\n" for i, j, w in self.edges)
        return "".join(lines)


def _dijkstra_dense(W: np.ndarray, source: int) -> np.ndarray:
    L = len(W)
    dist = np.full(L, np.inf)
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = np.zeros(L, dtype=bool)
    while heap:
        dv, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for u in np.flatnonzero(np.isfinite(W[v])):
            nd = dv + W[v, u]
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, int(u)))
    return dist


def build_gamma(G, net: ClusterNet, companions, link: LinkFunction, rule_r: float, ps,
                vertices=None) -> WeightedGraph:
    """Assemble Gamma(G, rule_r) over ``vertices`` (default: all vertices)."""
    centers = net.centers
    L = len(centers)
    if len(companions) != L:
        raise ConfigError("one companion cluster per net cluster is required")
    if vertices is None:
        vertices = np.arange(G.vertex_count)
    vertices = np.union1d(np.asarray(vertices, dtype=np.int64), centers)

    # center_est[j, i] estimates |X_{u_j} - X_{u_i}| through U'_i
    center_est = estimate_distances(G, centers, companions, link)
    W = _center_weights(center_est, rule_r, ps.delta)

    owner = np.full(len(vertices), -1, dtype=np.int64)
    for s, c in enumerate(net.clusters):
        owner[np.isin(vertices, c.members)] = s
    for s, comp in enumerate(companions):
        owner[np.isin(vertices, comp)] = s
    is_center = np.isin(vertices, centers)
    center_index = {int(u): s for s, u in enumerate(centers)}
    owner[is_center] = [center_index[int(v)] for v in vertices[is_center]]

    free = np.flatnonzero(owner < 0)
    if len(free):
        est = estimate_distances(G, vertices[free], companions, link)
        owner[free] = np.argmin(est, axis=1) if L else -1
    return WeightedGraph(vertices, centers, W, owner, is_center, float(rule_r), float(ps.delta), center_est)


def _center_weights(center_est: np.ndarray, rule_r: float, delta: float) -> np.ndarray:
    L = len(center_est)
    W = np.full((L, L), np.inf)
    np.fill_diagonal(W, 0.0)
    for i in range(L):
        for j in range(i + 1, L):
            est = center_est[j, i]
            if est <= rule_r:
                W[i, j] = W[j, i] = est + EDGE_OFFSET * delta
    return W


def with_rule(gamma: WeightedGraph, rule_r: float) -> WeightedGraph:
    """Same vertices and leaf attachments, center edges re-thresholded at ``rule_r``."""
    W = _center_weights(gamma.center_estimates, rule_r, gamma.delta)
    return WeightedGraph(gamma.vertices, gamma.centers, W, gamma.attach, gamma.is_center,
                         float(rule_r), gamma.delta, gamma.center_estimates)


def path_metric(gamma: WeightedGraph, v, w) -> np.ndarray | float:
    """Shortest weighted path length between vertices (``inf`` if disconnected).

    Every non-center has degree one, so a path between two vertices runs
    leaf edge, center path, leaf edge.  For ``rule_r = inf`` the center part
    is the direct edge whenever the center weights obey the triangle
    inequality; otherwise all-pairs search on the center graph is used.
    """
    scalar = np.ndim(v) == 0
    v = np.atleast_1d(v)
    w = np.atleast_1d(w)
    if math.isinf(gamma.rule_r) and gamma.triangle_closed():
        out = closed_form_distance(gamma, v, w)
    else:
        kv = np.array([gamma.position(x) for x in v], dtype=np.int64)
        kw = np.array([gamma.position(x) for x in w], dtype=np.int64)
        D = gamma.center_distances()
        out = gamma.leaf_weight(kv) + D[gamma.attach[kv], gamma.attach[kw]] + gamma.leaf_weight(kw)
        out = np.where(kv == kw, 0.0, out)
    return float(out[0]) if scalar else out


def closed_form_distance(gamma: WeightedGraph, v, w) -> np.ndarray:
    """Path shape leaf - center - center - leaf with the direct center edge."""
    v = np.atleast_1d(v)
    w = np.atleast_1d(w)
    kv = np.array([gamma.position(x) for x in v], dtype=np.int64)
    kw = np.array([gamma.position(x) for x in w], dtype=np.int64)
    sv, sw = gamma.attach[kv], gamma.attach[kw]
    mid = gamma.center_weights[sv, sw]
    out = gamma.leaf_weight(kv) + mid + gamma.leaf_weight(kw)
    return np.where(kv == kw, 0.0, out)


def dijkstra_distance(gamma: WeightedGraph, v: int, w: int) -> float:
    """Reference shortest path on the full edge list (slow; for cross-checks)."""
    adj: dict[int, list[tuple[int, float]]] = {}
    for a, b, wt in gamma.edges:
        adj.setdefault(a, []).append((b, wt))
        adj.setdefault(b, []).append((a, wt))
    dist = {int(v): 0.0}
    heap = [(0.0, int(v))]
    while heap:
        d, x = heapq.heappop(heap)
        if x == int(w):
            return d
        if d > dist.get(x, math.inf):
            continue
        for y, wt in adj.get(x, ()):
            nd = d + wt
            if nd < dist.get(y, math.inf):
                dist[y] = nd
                heapq.heappush(heap, (nd, y))
    return math.inf


@dataclass(frozen=True)
class EmpiricalMeasure:
    weights: np.ndarray
    V0: np.ndarray
    assignment: np.ndarray

    def total_variation(self, other: "EmpiricalMeasure") -> float:
        return 0.5 * float(np.abs(self.weights - other.weights).sum())


def empirical_measure(G, companions, V0, link: LinkFunction) -> EmpiricalMeasure:
    """Fraction of ``V0`` assigned to each center by the smallest estimate."""
    V0 = np.asarray(V0, dtype=np.int64)
    L = len(companions)
    est = estimate_distances(G, V0, companions, link)
    assign = np.argmin(est, axis=1)
    weights = np.bincount(assign, minlength=L) / len(V0)
    return EmpiricalMeasure(weights, V0, assign)


# -- evaluation ------------------------------------------------------------------

def geodesic_ball_measure(model: mf.ManifoldModel, t: float) -> float:
    """Surface measure of a geodesic ball of radius ``t``."""
    from scipy import integrate

    if t <= 0:
        return 0.0
    R = model.R
    if model.kind == "circle":
        return min(1.0, t / (math.pi * R))
    if model.kind == "sphere2":
        return (1.0 - math.cos(min(t / R, math.pi))) / 2.0
    rho = t / R

    def width(a):
        return 2.0 * min(math.pi, math.sqrt(max(0.0, rho * rho - a * a)))

    val, _ = integrate.quad(width, 0.0, min(rho, math.pi), limit=200)
    return min(1.0, 2.0 * val / (4.0 * math.pi ** 2))


def euclidean_ball_measure(model: mf.ManifoldModel, t: float) -> float:
    return 0.0 if t <= 0 else mf.mu_min(model, min(t, model.diam_euc))


def sample_pairs(vertices, count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Random vertex pairs with ``v != w``."""
    vertices = np.asarray(vertices, dtype=np.int64)
    rng = stream(seed, "eval-pairs")
    a = rng.integers(0, len(vertices), count)
    b = rng.integers(0, len(vertices) - 1, count)
    b = np.where(b >= a, b + 1, b)
    return vertices[a], vertices[b]


@dataclass
class ReconReport:
    pair_v: np.ndarray
    pair_w: np.ndarray
    true_gd: np.ndarray
    est_gd: np.ndarray
    true_euc: np.ndarray
    est_euc: np.ndarray
    sandwich: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def abs_err_gd(self) -> np.ndarray:
        return np.abs(self.est_gd - self.true_gd)

    @property
    def abs_err_euc(self) -> np.ndarray:
        return np.abs(self.est_euc - self.true_euc)

    def to_csv(self) -> str:
        lines = ["pair_id,true_gd,est_gd,true_euc,est_euc,abs_err_gd,abs_err_euc\n"]
        eg, ee = self.abs_err_gd, self.abs_err_euc
        for k in range(len(self.pair_v)):
            lines.append(
                f"{k},{self.true_gd[k]:.17g},{self.est_gd[k]:.17g},{self.true_euc[k]:.17g},"
                f"{self.est_euc[k]:.17g},{eg[k]:.17g},{ee[k]:.17g}\n"
            )
        return "".join(lines)

    def write(self, csv_path, json_path):
        atomic_write(csv_path, self.to_csv())
        atomic_write(json_path, dump_json(self.summary))


def _error_stats(err: np.ndarray) -> dict:
    finite = err[np.isfinite(err)]
    stats = {"unreachable": int(len(err) - len(finite))}
    if len(finite):
        stats.update({
            "max": float(finite.max()), "mean": float(finite.mean()),
            "q50": float(np.quantile(finite, 0.5)), "q90": float(np.quantile(finite, 0.9)),
            "q99": float(np.quantile(finite, 0.99)),
        })
    return stats


def sandwich_check(model, X, gamma: WeightedGraph, nu: EmpiricalMeasure, metric: str,
                   slack: float, radii) -> list[dict]:
    """Compare nu-balls around centers in the Gamma metric with mu-balls.

    The radius shift is measured, not assumed: the largest center-to-center
    error of the Gamma metric plus the largest distance from a ``V0`` vertex
    to its assigned center.
    """
    if metric == "geodesic":
        dist = lambda a, b: mf.geodesic_dist(model, a, b)
        ball = lambda t: geodesic_ball_measure(model, t)
    else:
        dist = lambda a, b: mf.euclidean_dist(a, b)
        ball = lambda t: euclidean_ball_measure(model, t)
    C = X[gamma.centers]
    L = len(C)
    D = gamma.center_distances()
    true_cc = dist(C[:, None, :], C[None, :, :])
    finite = np.isfinite(D)
    center_err = float(np.abs(D - true_cc)[finite].max()) if L else 0.0
    attach_err = float(dist(X[nu.V0], C[nu.assignment]).max()) if L else 0.0
    shift = center_err + attach_err
    rows = []
    for s in range(L):
        for t in radii:
            mass = float(nu.weights[D[s] < t].sum())
            lower = ball(t - shift) - slack
            upper = ball(t + shift) + slack
            rows.append({
                "metric": metric, "center": int(gamma.centers[s]), "t": float(t), "nu": mass,
                "lower": lower, "upper": upper, "shift": shift, "ok": bool(lower <= mass <= upper),
            })
    return rows


def evaluate_reconstruction(latents, model, gamma_geo: WeightedGraph, gamma_euc: WeightedGraph,
                            nu: EmpiricalMeasure | None, ps, pairs: int = 10_000, seed: int = 0,
                            sandwich_radii: int = 5) -> ReconReport:
    """Error statistics of both path metrics against the latent geometry."""
    X = _latents(latents)
    v, w = sample_pairs(gamma_euc.vertices, pairs, seed)
    report = ReconReport(
        pair_v=v, pair_w=w,
        true_gd=mf.geodesic_dist(model, X[v], X[w]), est_gd=np.asarray(path_metric(gamma_geo, v, w)),
        true_euc=mf.euclidean_dist(X[v], X[w]), est_euc=np.asarray(path_metric(gamma_euc, v, w)),
    )
    summary = {
        "pairs": int(pairs), "delta": ps.delta, "seed": int(seed), "params": ps.to_dict(),
        "centers": int(len(gamma_euc.centers)),
        "geodesic": _error_stats(report.abs_err_gd),
        "euclidean": _error_stats(report.abs_err_euc),
        "euclidean_within_4delta": float(np.mean(report.abs_err_euc <= 4 * ps.delta)),
    }
    if nu is not None:
        slack = ps.n ** -0.25 + 0.02
        radii_gd = [model.diam_gd * k / (sandwich_radii + 1) for k in range(1, sandwich_radii + 1)]
        radii_eu = [model.diam_euc * k / (sandwich_radii + 1) for k in range(1, sandwich_radii + 1)]
        report.sandwich = (
            sandwich_check(model, X, gamma_geo, nu, "geodesic", slack, radii_gd)
            + sandwich_check(model, X, gamma_euc, nu, "euclidean", slack, radii_eu)
        )
        summary["sandwich_ok"] = float(np.mean([r["ok"] for r in report.sandwich])) if report.sandwich else 1.0
    report.summary = summary
    return report
