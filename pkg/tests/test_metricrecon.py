import math

import numpy as np
import pytest

from conftest import greedy_net, synthetic_gamma
from rggeom import clusternet as cn
from rggeom import manifold as mf
from rggeom import metricrecon as mr
from rggeom.errors import AccessError, ConfigError, DomainError
from rggeom.linkfn import LinkFunction
from rggeom.params import ParamSet
from rggeom.streams import stream

AFF = LinkFunction.affine(1.0, 0.25)


class RatioStub:
    """Graph double whose neighbour ratios are read from a table."""

    def __init__(self, table):
        self.table = table

    def neighbor_ratios(self, rows, S):
        return np.array([self.table[(int(v), tuple(S))] for v in rows], dtype=float)

    def neighbor_count_in(self, v, S):
        return round(self.table[(int(v), tuple(S))] * len(S))


def ps_for(delta, eta=None, n=100):
    eta = delta / 4 if eta is None else eta
    return ParamSet(0.1, n, eta / 2, eta, delta, 2 * delta, 1.0, 1.0, 0.05, 2)


def one_cluster_net(members, center, delta=0.4):
    return cn.ClusterNet([cn.Cluster(np.asarray(members), center, delta / 4)], delta, True)


def test_companion_threshold_is_inclusive():
    ps = ps_for(0.4, eta=4 / 3 * 0.4)  # 1.5 eta = 0.8, p(0.8) = 0.8
    net = one_cluster_net([0, 1], 0, ps.delta)
    U = (0, 1)
    G = RatioStub({(5, U): 0.8, (6, U): 0.8 - 1e-12, (7, U): 1.0})
    comps = mr.extract_companion_clusters(G, net, [np.array([5, 6, 7])], ps, AFF)
    assert comps[0].tolist() == [5, 7]
    with pytest.raises(ConfigError):
        mr.extract_companion_clusters(G, net, [], ps, AFF)


def test_companion_empty_on_edgeless(edgeless_graph, exp_link):
    net = one_cluster_net(np.arange(5), 0)
    comps = mr.extract_companion_clusters(edgeless_graph, net, [np.arange(5, 30)], ps_for(0.4), exp_link)
    assert len(comps[0]) == 0


def test_center_distance_examples(complete_graph, exp_link):
    assert mr.estimate_center_distance(complete_graph, 0, [1, 2, 3], exp_link) == 0.0
    G = RatioStub({(9, (1, 2, 3, 4)): 0.75})
    assert mr.estimate_center_distance(G, 9, [1, 2, 3, 4], AFF) == 1.0
    with pytest.raises(DomainError):
        mr.estimate_center_distance(G, 9, [], AFF)


def test_center_weight_example():
    # estimate plus 0.04 delta; with delta = 0.01 that is 0.5004
    W = mr._center_weights(np.array([[0.0, 0.5], [0.5, 0.0]]), math.inf, 0.01)
    assert W[0, 1] == W[1, 0] == pytest.approx(0.5004, abs=1e-15)
    W = mr._center_weights(np.array([[0.0, 0.5], [0.5, 0.0]]), math.inf, 0.1)
    assert W[0, 1] == pytest.approx(0.504, abs=1e-15)
    W = mr._center_weights(np.array([[0.0, 0.5], [0.5, 0.0]]), 0.4, 0.01)
    assert W[0, 1] == math.inf


def test_leaf_tie_goes_to_smaller_index():
    net = cn.ClusterNet([cn.Cluster(np.array([k]), k, 0.1) for k in range(6)], 0.4, True)
    comps = [np.array([10 + k]) for k in range(6)]
    table = {}
    for v in list(range(6)) + [20]:
        for s, c in enumerate(comps):
            table[(v, tuple(c))] = 0.5 if (v == 20 and s in (2, 5)) else 0.1
    gamma = mr.build_gamma(RatioStub(table), net, comps, AFF, math.inf, ps_for(0.4), vertices=[20])
    assert gamma.attach[gamma.position(20)] == 2


def test_gamma_structure(sphere):
    X = mf.sample_points(sphere, stream(0, "g"), 400)
    centers = greedy_net(X, 0.45)
    gamma = synthetic_gamma(X, centers, 0.5)
    L = len(centers)
    assert np.all(np.isfinite(gamma.center_weights))
    edges = gamma.edges
    assert len(edges) == L * (L - 1) // 2 + (400 - L)
    leaves = [e for e in edges if e[0] not in set(centers.tolist())]
    assert all(w == 0.5 for _, _, w in leaves)
    text = gamma.to_text().splitlines()
    assert text[0].startswith("# gamma rule_r=inf") and len(text) == len(edges) + 1


def test_path_metric_examples(sphere):
    X = mf.sample_points(sphere, stream(1, "pm"), 300)
    centers = greedy_net(X, 0.5)
    delta = 0.5
    gamma = synthetic_gamma(X, centers, delta)
    assert mr.path_metric(gamma, 7, 7) == 0.0
    leaves = np.flatnonzero(~gamma.is_center)
    a = next(v for v in leaves if gamma.attach[v] == 0)
    b = next(v for v in leaves if gamma.attach[v] == 1)
    omega = gamma.center_weights[0, 1]
    assert mr.path_metric(gamma, a, b) == delta + omega + delta


@pytest.mark.parametrize("seed", range(3))
def test_closed_form_equals_search(sphere, seed):
    X = mf.sample_points(sphere, stream(seed, "cf"), 500)
    gamma = synthetic_gamma(X, greedy_net(X, 0.4), 0.4)
    assert gamma.triangle_closed()
    v, w = mr.sample_pairs(gamma.vertices, 200, seed)
    closed = mr.closed_form_distance(gamma, v, w)
    for k in range(200):
        assert closed[k] == mr.dijkstra_distance(gamma, v[k], w[k])


def test_finite_rule_uses_search(sphere):
    X = mf.sample_points(sphere, stream(4, "fr"), 400)
    delta = 0.3
    gamma = synthetic_gamma(X, greedy_net(X, delta), delta, rule_r=2 * delta ** (1 / 3))
    v, w = mr.sample_pairs(gamma.vertices, 100, 1)
    got = mr.path_metric(gamma, v, w)
    for k in range(100):
        assert got[k] == pytest.approx(mr.dijkstra_distance(gamma, v[k], w[k]), rel=1e-12)


def test_unreachable_is_inf():
    net_X = np.array([[1.0, 0, 0], [-1.0, 0, 0]])
    gamma = synthetic_gamma(net_X, np.array([0, 1]), 0.1, rule_r=0.5)
    assert mr.path_metric(gamma, 0, 1) == math.inf
    assert mr.dijkstra_distance(gamma, 0, 1) == math.inf


def test_euclidean_path_metric_is_a_metric(sphere):
    X = mf.sample_points(sphere, stream(5, "m"), 300)
    gamma = synthetic_gamma(X, greedy_net(X, 0.5), 0.5)
    a, b, c = (mr.sample_pairs(gamma.vertices, 300, s)[0] for s in range(3))
    dab = mr.path_metric(gamma, a, b)
    assert np.array_equal(dab, mr.path_metric(gamma, b, a))
    assert np.all(dab <= mr.path_metric(gamma, a, c) + mr.path_metric(gamma, c, b) + 1e-12)


def test_with_rule_keeps_leaves(sphere):
    X = mf.sample_points(sphere, stream(6, "wr"), 300)
    gamma = synthetic_gamma(X, greedy_net(X, 0.4), 0.4)
    geo = mr.with_rule(gamma, 0.9)
    assert np.array_equal(geo.attach, gamma.attach)
    finite = np.isfinite(geo.center_weights)
    assert np.all(gamma.center_estimates[finite] <= 0.9)


def test_synthetic_gamma_euclidean_error_bound(sphere):
    X = mf.sample_points(sphere, stream(7, "eb"), 1500)
    delta = 0.3
    gamma = synthetic_gamma(X, greedy_net(X, 0.9 * delta), delta)
    rep = mr.evaluate_reconstruction(X, sphere, gamma, gamma, None, ps_for(delta), pairs=2000, seed=1)
    assert rep.summary["euclidean_within_4delta"] == 1.0
    assert np.all(rep.abs_err_euc <= 4 * delta)


def test_gamma_build_is_deterministic(small_graph, exp_link):
    ps = ps_for(0.6, n=40)
    net = cn.ClusterNet([cn.Cluster(np.arange(0, 10), 0, 0.15), cn.Cluster(np.arange(10, 20), 10, 0.15)],
                        0.6, True)
    comps = mr.extract_companion_clusters(small_graph, net, [np.arange(20, 60), np.arange(60, 100)], ps, exp_link)
    g1 = mr.build_gamma(small_graph, net, comps, exp_link, math.inf, ps)
    g2 = mr.build_gamma(small_graph, net, comps, exp_link, math.inf, ps)
    assert g1.edges == g2.edges
    assert len(g1.vertices) == 200
    for s, c in enumerate(net.clusters):
        assert np.all(g1.attach[c.members] == s)


def test_empirical_measure_examples(small_graph, exp_link):
    one = mr.empirical_measure(small_graph, [np.arange(0, 10)], np.arange(100, 140), exp_link)
    assert one.weights.tolist() == [1.0]

    G = RatioStub({})
    comps = [np.array([50]), np.array([60])]
    for v, near in zip(range(4), [0, 0, 1, 1]):
        G.table[(v, (50,))] = 0.9 if near == 0 else 0.1
        G.table[(v, (60,))] = 0.9 if near == 1 else 0.1
    nu = mr.empirical_measure(G, comps, np.arange(4), AFF)
    assert nu.weights.tolist() == [0.5, 0.5]


def test_empirical_measure_order_free(small_graph, exp_link):
    comps = [np.arange(0, 10), np.arange(10, 20), np.arange(20, 30)]
    V0 = np.arange(100, 200)
    a = mr.empirical_measure(small_graph, comps, V0, exp_link)
    b = mr.empirical_measure(small_graph, comps, stream(0, "perm").permutation(V0), exp_link)
    assert np.array_equal(a.weights, b.weights)
    assert a.weights.sum() == pytest.approx(1.0, abs=1e-12) and np.all(a.weights >= 0)
    assert a.total_variation(a) == 0.0


@pytest.mark.parametrize("model", [mf.ManifoldModel.circle(), mf.ManifoldModel.sphere2(),
                                   mf.ManifoldModel.flat_torus()], ids=lambda m: m.kind)
@pytest.mark.parametrize("frac", [0.1, 0.4, 0.8])
def test_geodesic_ball_measure(model, frac):
    t = frac * model.diam_gd
    X = mf.sample_points(model, stream(2, "gb"), 200_000)
    emp = float(np.mean(mf.geodesic_dist(model, X, X[0]) < t))
    assert mr.geodesic_ball_measure(model, t) == pytest.approx(emp, abs=0.006)


def test_evaluate_self_pairs_and_access(sphere, small_graph):
    X = mf.sample_points(sphere, stream(8, "sp"), 100)
    gamma = synthetic_gamma(X, greedy_net(X, 0.5), 0.5)
    assert mr.path_metric(gamma, np.arange(5), np.arange(5)).tolist() == [0.0] * 5
    with pytest.raises(AccessError):
        mr.evaluate_reconstruction(small_graph, sphere, gamma, gamma, None, ps_for(0.5))


def test_report_files(tmp_path, sphere):
    X = mf.sample_points(sphere, stream(9, "rf"), 200)
    gamma = synthetic_gamma(X, greedy_net(X, 0.5), 0.5)
    V0 = np.arange(200)
    assign = gamma.attach[[gamma.position(v) for v in V0]]
    nu = mr.EmpiricalMeasure(np.bincount(assign, minlength=len(gamma.centers)) / 200, V0, assign)
    rep = mr.evaluate_reconstruction(X, sphere, mr.with_rule(gamma, 1.5), gamma, nu, ps_for(0.5, n=4000),
                                     pairs=50, seed=2)
    rep.write(tmp_path / "p.csv", tmp_path / "s.json")
    header = (tmp_path / "p.csv").read_text().splitlines()[0]
    assert header == "pair_id,true_gd,est_gd,true_euc,est_euc,abs_err_gd,abs_err_euc"
    assert len(rep.sandwich) == 2 * 5 * len(gamma.centers)
    assert 0.0 <= rep.summary["sandwich_ok"] <= 1.0
