"""Cluster extraction and the cluster-net builder.

Every routine here sees only adjacency plus the known link function.  The
``verify_*`` helpers at the bottom are the evaluation side; they need latent
positions and therefore an evaluation view of the graph.

Thresholds are those of the construction, expressed relative to the
parameter scales: ``0.95 delta`` bands around ``r`` and ``sqrt(2) r``, the
``c3 delta`` band and ``p(2 delta)`` floor of the sharp filter, the
``0.45 delta`` / ``0.55 delta`` annulus of the net check and the
``c1 eta^2 / 2`` gap of the pair ranking.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AccessError, ClusterNotFound, ConfigError, PreconditionError
from .fileio import dump_json
from .linkfn import LinkFunction, eval_link
from .streams import stream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Cluster:
    members: np.ndarray
    center: int
    radius_param: float

    def __post_init__(self):
        if self.center not in set(self.members.tolist()):
            raise PreconditionError("cluster center must be a member")

    def __len__(self) -> int:
        return len(self.members)

    def to_dict(self) -> dict:
        return {
            "center": int(self.center),
            "members": [int(v) for v in self.members],
            "radius_param": self.radius_param,
        }


@dataclass
class ClusterNet:
    clusters: list[Cluster]
    delta: float
    halted_normally: bool
    provenance: dict = field(default_factory=dict)

    @property
    def centers(self) -> np.ndarray:
        return np.array([c.center for c in self.clusters], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.clusters)

    def to_json(self) -> str:
        return dump_json({
            "clusters": [c.to_dict() for c in self.clusters],
            "delta": self.delta,
            "halted_normally": self.halted_normally,
            "provenance": self.provenance,
        })


@dataclass(frozen=True)
class BatchLayout:
    """Disjoint batches ``groups[l][alpha]``, each of ``n`` vertices.

    ``alpha`` runs over ``0..d+1``.
    """

    groups: list[list[np.ndarray]]
    n: int
    d: int

    def __post_init__(self):
        seen = []
        for g in self.groups:
            if len(g) != self.d + 2:
                raise ConfigError("each batch group needs d + 2 batches")
            for b in g:
                if len(b) != self.n:
                    raise ConfigError("every batch must have exactly n vertices")
                seen.append(b)
        if seen:
            allv = np.concatenate(seen)
            if len(np.unique(allv)) != len(allv):
                raise ConfigError("batches must be disjoint")

    @classmethod
    def contiguous(cls, n: int, d: int, groups: int, start: int = 0) -> "BatchLayout":
        """Consecutive index blocks; latents are i.i.d., so any fixed split is a random split."""
        out, pos = [], start
        for _ in range(groups):
            row = []
            for _ in range(d + 2):
                row.append(np.arange(pos, pos + n, dtype=np.int64))
                pos += n
            out.append(row)
        return cls(out, n, d)

    @property
    def stop(self) -> int:
        """One past the largest vertex index used."""
        return max(int(b[-1]) for g in self.groups for b in g) + 1 if self.groups else 0


# -- cluster generation ----------------------------------------------------------

def generate_cluster(G, V1, V2, ps) -> Cluster:
    """Extract one cluster from ``V2`` using common neighbours in ``V1``.

    Pairs of ``V2`` are ranked by ``|N_V1(i) & N_V1(j)|``; every pair whose
    normalized count is within ``c1 eta^2 / 2`` of the top one is kept.  The
    kept pairs form a graph and the answer is its maximum-degree vertex with
    its neighbourhood.  Ranking ties only affect which pairs sit at the cut,
    and the cut is a threshold on the count itself, so the kept set equals
    the prefix of the sorted list described by the construction.
    """
    V1 = np.asarray(V1, dtype=np.int64)
    V2 = np.unique(np.asarray(V2, dtype=np.int64))
    if len(V2) < 2:
        raise PreconditionError("generate_cluster needs at least two candidates")
    n = len(V1)
    counts = G.common_neighbor_matrix(V2, V1)
    np.fill_diagonal(counts, -1)
    top = counts.max()
    gap = 0.5 * ps.c1 * ps.eta ** 2
    keep = counts / n >= top / n - gap
    np.fill_diagonal(keep, False)
    degree = keep.sum(axis=1)
    k = int(np.argmax(degree))
    members = np.union1d(V2[keep[k]], V2[k:k + 1])
    cluster = Cluster(members, int(V2[k]), ps.eta)
    assert np.isin(members, V2).all()
    return cluster


# -- filters ----------------------------------------------------------------------

def _as_pair(c) -> tuple[np.ndarray, int]:
    if isinstance(c, Cluster):
        return c.members, c.center
    members, center = c
    return np.asarray(members, dtype=np.int64), int(center)


def orthogonal_filter(G, established, W, ps, link: LinkFunction) -> np.ndarray:
    """Vertices of ``W`` at distance about ``r`` from cluster 0 and about
    ``sqrt(2) r`` from clusters ``1..k``, judged by neighbour ratios."""
    W = np.asarray(W, dtype=np.int64)
    r, delta = ps.r, ps.delta
    s2r = math.sqrt(2.0) * r
    keep = np.ones(len(W), dtype=bool)
    for alpha, c in enumerate(established):
        members, _ = _as_pair(c)
        rad = r if alpha == 0 else s2r
        lo = eval_link(link, rad + 0.95 * delta)
        hi = eval_link(link, rad - 0.95 * delta)
        idx = np.flatnonzero(keep)
        if len(idx) == 0:
            break
        ratio = G.neighbor_ratios(W[idx], members)
        keep[idx] = (ratio >= lo) & (ratio <= hi)
    return W[keep]


def sharp_filter(G, established, i_nx: int, W, ps, link: LinkFunction) -> np.ndarray:
    """Vertices of ``W`` whose ratios into clusters ``1..d`` match those of
    ``i_nx`` to within ``c3 delta`` and whose ratio into cluster 0 is at least
    ``p(2 delta)``."""
    W = np.asarray(W, dtype=np.int64)
    band = ps.c3 * ps.delta
    m0, _ = _as_pair(established[0])
    keep = G.neighbor_ratios(W, m0) >= eval_link(link, 2 * ps.delta)
    for c in established[1:]:
        members, _ = _as_pair(c)
        idx = np.flatnonzero(keep)
        if len(idx) == 0:
            break
        target = G.neighbor_count_in(i_nx, members) / len(members)
        ratio = G.neighbor_ratios(W[idx], members)
        keep[idx] = np.abs(ratio - target) <= band
    return W[keep]


# -- nearby cluster -------------------------------------------------------------

def build_nearby_cluster(G, i_nx: int, seed_cluster, batches, ps, link: LinkFunction,
                         trace: list | None = None) -> Cluster:
    """Build a cluster near ``i_nx`` from ``d + 1`` fresh batches.

    ``seed_cluster`` is the existing cluster that ``i_nx`` was found next to.
    The first ``d`` batches produce navigation clusters in almost orthogonal
    directions; the last one is filtered down to the vertices whose ratio
    profile matches ``i_nx``.  If ``trace`` is a list, the navigation
    clusters are appended to it.
    """
    d = len(batches) - 1
    members0, center0 = _as_pair(seed_cluster)
    established = [Cluster(members0, center0, ps.eta)]
    for k in range(1, d + 1):
        Wk = batches[k - 1]
        cand = orthogonal_filter(G, established, Wk, ps, link)
        if len(cand) < 2:
            raise ClusterNotFound(k, f"orthogonal filter kept {len(cand)} vertices")
        established.append(generate_cluster(G, Wk, cand, ps))
    if trace is not None:
        trace.extend(established)
    last = batches[d]
    cand = sharp_filter(G, established, i_nx, last, ps, link)
    if len(cand) < 2:
        raise ClusterNotFound(d + 1, f"sharp filter kept {len(cand)} vertices")
    return generate_cluster(G, last, cand, ps)


# -- net check ------------------------------------------------------------------

def net_check(G, net_so_far, W, ps, link: LinkFunction):
    """Look for a vertex in the annulus ``0.45 delta .. 0.55 delta`` of some
    cluster and farther than ``0.45 delta`` from all clusters.

    Returns ``(i_nx, cluster)`` for the first hit scanning clusters in order
    and vertices ascending, or ``None`` when there is none.
    """
    if not net_so_far:
        raise PreconditionError("net check needs at least one cluster")
    W = np.sort(np.asarray(W, dtype=np.int64))
    far = eval_link(link, 0.45 * ps.delta)
    near = eval_link(link, 0.55 * ps.delta)
    ratios = np.column_stack([G.neighbor_ratios(W, _as_pair(c)[0]) for c in net_so_far])
    flat = np.all(ratios <= far, axis=1)
    for alpha, c in enumerate(net_so_far):
        hits = np.flatnonzero(flat & (ratios[:, alpha] >= near))
        if len(hits):
            return int(W[hits[0]]), c
    return None


# -- net construction -----------------------------------------------------------

@dataclass
class NetTrace:
    """Per-round record of what the builder did (for evaluation only)."""

    pivots: list = field(default_factory=list)
    anchors: list = field(default_factory=list)
    navigation: list = field(default_factory=list)


def build_net(G, layout: BatchLayout, ps, link: LinkFunction, max_clusters: int | None = None,
              trace: NetTrace | None = None) -> ClusterNet:
    """Grow a cluster net until the net check finds no gap.

    The first cluster comes from the last batch of group 1.  The net check of
    round ``l`` reads batch 0 of group ``l - 1`` (unused otherwise), and the
    new cluster of round ``l`` is built from batches ``1..d+1`` of group
    ``l``.  Running out of groups stops the loop with ``halted_normally``
    false.
    """
    groups = layout.groups
    if not groups:
        raise ConfigError("empty batch layout")
    d = layout.d
    first = generate_cluster(G, groups[0][d + 1], groups[0][d + 1], ps)
    clusters = [first]
    halted = False
    rnd = 2
    while True:
        if max_clusters is not None and len(clusters) >= max_clusters:
            break
        hit = net_check(G, clusters, groups[rnd - 2][0], ps, link)
        if hit is None:
            halted = True
            break
        if rnd > len(groups):
            break
        i_nx, anchor = hit
        nav: list = []
        try:
            new = build_nearby_cluster(G, i_nx, anchor, groups[rnd - 1][1:d + 2], ps, link, trace=nav)
        except ClusterNotFound as err:
            raise err.with_loop_index(rnd) from None
        if trace is not None:
            trace.pivots.append(i_nx)
            trace.anchors.append(anchor.center)
            trace.navigation.append(nav)
        log.debug("round %d: pivot %d -> center %d (%d members)", rnd, i_nx, new.center, len(new))
        clusters.append(new)
        rnd += 1
    return ClusterNet(clusters, ps.delta, halted)


# -- evaluation side ----------------------------------------------------------------

def _latents(source) -> np.ndarray:
    if hasattr(source, "latents"):
        return source.latents
    if source is None:
        raise AccessError("evaluation needs latent positions")
    return np.asarray(source)


def verify_cluster(latents, c: Cluster, t: float, min_size: float = 0.0) -> bool:
    """All members strictly within ``t`` of the center, and at least ``min_size`` members."""
    X = _latents(latents)
    dist = np.linalg.norm(X[c.members] - X[c.center], axis=1)
    return bool(np.all(dist < t) and len(c.members) >= min_size)


def cluster_radius(latents, c: Cluster) -> float:
    X = _latents(latents)
    return float(np.linalg.norm(X[c.members] - X[c.center], axis=1).max())


def verify_delta_net(model, latents, net: ClusterNet, probes: int, seed: int = 0) -> float:
    """Largest distance from a probe point on the model to the nearest center."""
    from .manifold import sample_points

    X = _latents(latents)
    if len(net) == 0:
        return math.inf
    C = X[net.centers]
    P = sample_points(model, stream(seed, "net-probes"), probes)
    best = np.full(probes, np.inf)
    for c in C:
        np.minimum(best, np.linalg.norm(P - c, axis=1), out=best)
    return float(best.max())


def center_separation(latents, net: ClusterNet) -> float:
    """Smallest pairwise distance between centers (``inf`` below two clusters)."""
    X = _latents(latents)
    C = X[net.centers]
    if len(C) < 2:
        return math.inf
    diff = np.linalg.norm(C[:, None, :] - C[None, :, :], axis=-1)
    return float(diff[np.triu_indices(len(C), 1)].min())
