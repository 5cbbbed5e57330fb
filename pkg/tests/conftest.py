import numpy as np
import pytest

from rggeom import rgg
from rggeom.linkfn import LinkFunction
from rggeom.manifold import ManifoldModel


@pytest.fixture(scope="session")
def sphere():
    return ManifoldModel.sphere2()


@pytest.fixture(scope="session")
def exp_link():
    return LinkFunction.exp_decay(0.9, 1.0)


@pytest.fixture(scope="session")
def small_graph(sphere, exp_link):
    """Seeded n=200 sphere graph, observer view."""
    return rgg.generate(sphere, exp_link, 200, seed=11)


@pytest.fixture(scope="session")
def complete_graph(sphere):
    return rgg.generate(sphere, LinkFunction.affine(1.0, 0.0), 5, seed=1)


@pytest.fixture(scope="session")
def edgeless_graph(sphere):
    return rgg.generate(sphere, LinkFunction.affine(0.0, 0.0), 30, seed=1)


def brute_adjacency(G):
    """Adjacency recomputed pair by pair from latents and keyed variates."""
    from rggeom.linkfn import eval_link
    from rggeom.streams import pair_uniforms

    X = G.with_evaluation().latents
    link = G._link
    n = G.vertex_count
    A = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            p = eval_link(link, float(np.sqrt(np.sum((X[i] - X[j]) ** 2))))
            A[i, j] = A[j, i] = float(pair_uniforms(G.seed, i, j)) <= p
    return A


def greedy_net(X, sep):
    """Indices of a maximal ``sep``-separated subset of the rows of ``X``, greedy in index order."""
    chosen = []
    best = np.full(len(X), np.inf)
    for k in range(len(X)):
        if best[k] >= sep:
            chosen.append(k)
            np.minimum(best, np.linalg.norm(X - X[k], axis=1), out=best)
    return np.array(chosen, dtype=np.int64)


def synthetic_gamma(X, centers, delta, rule_r=np.inf, vertices=None):
    """Gamma built from exact latent distances, with the prescribed offsets."""
    from rggeom.metricrecon import WeightedGraph, _center_weights

    vertices = np.arange(len(X)) if vertices is None else np.asarray(vertices)
    vertices = np.union1d(vertices, centers)
    C = X[centers]
    est = np.linalg.norm(C[:, None, :] - C[None, :, :], axis=-1)
    W = _center_weights(est, rule_r, delta)
    attach = np.argmin(np.linalg.norm(X[vertices][:, None, :] - C[None, :, :], axis=-1), axis=1)
    is_center = np.isin(vertices, centers)
    pos = {int(u): s for s, u in enumerate(centers)}
    attach[is_center] = [pos[int(v)] for v in vertices[is_center]]
    return WeightedGraph(vertices, np.asarray(centers), W, attach, is_center, float(rule_r), float(delta), est)
