import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rggeom import manifold as mf
from rggeom.errors import ConfigError, DomainError
from rggeom.streams import stream

MODELS = [mf.ManifoldModel.circle(), mf.ManifoldModel.sphere2(), mf.ManifoldModel.flat_torus()]


def test_model_constants():
    c, s, t = MODELS
    assert (c.d, c.N, c.kappa, c.diam_euc, c.diam_gd) == (1, 2, 1.0, 2.0, math.pi)
    assert (s.d, s.N, s.kappa) == (2, 3, 1.0)
    assert (t.d, t.N, t.kappa, t.r_M0) == (2, 4, 1.0, 1.0)
    for m in MODELS:
        assert 0 < m.r_M <= 0.01 / m.kappa
        assert m.diam_euc <= m.diam_gd


def test_scaled_model():
    m = mf.ManifoldModel.sphere2(R=3.0)
    assert m.kappa == pytest.approx(1 / 3)
    assert m.r_M == pytest.approx(0.03)


def test_bad_model():
    with pytest.raises(ConfigError):
        mf.ManifoldModel("klein_bottle")
    with pytest.raises(ConfigError):
        mf.ManifoldModel.sphere2(R=-1.0)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_samples_on_surface(model):
    X = mf.sample_points(model, stream(3, "t"), 1000)
    assert X.shape == (1000, model.N)
    assert mf.on_surface(model, X).all()


def test_circle_point_has_unit_norm():
    p = mf.sample_point(MODELS[0], stream(0, "c"))
    assert np.linalg.norm(p) == pytest.approx(1.0, abs=1e-15)


def test_torus_point_norm():
    p = mf.sample_point(MODELS[2], stream(0, "t"))
    assert np.linalg.norm(p) == pytest.approx(math.sqrt(2), abs=1e-14)


def test_sphere_sample_mean_near_origin():
    X = mf.sample_points(MODELS[1], stream(5, "mean"), 100_000)
    assert np.all(np.abs(X.mean(axis=0)) < 0.02)


def test_sampling_is_deterministic():
    a = mf.sample_points(MODELS[1], stream(9, "x"), 10)
    b = mf.sample_points(MODELS[1], stream(9, "x"), 10)
    assert np.array_equal(a, b)


def test_geodesic_examples():
    s = MODELS[1]
    assert mf.geodesic_dist(s, np.array([1.0, 0, 0]), np.array([-1.0, 0, 0])) == pytest.approx(math.pi)
    assert mf.geodesic_dist(MODELS[0], np.array([1.0, 0]), np.array([0, 1.0])) == pytest.approx(math.pi / 2)
    t = MODELS[2]
    p = mf.torus_point(t, 0.0, 0.0)
    q = mf.torus_point(t, 1.5 * math.pi, 0.0)
    assert mf.geodesic_dist(t, p, q) == pytest.approx(math.pi / 2)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_geodesic_is_a_metric(model):
    rng = stream(1, "metric")
    P, Q, S = (mf.sample_points(model, rng, 500) for _ in range(3))
    dpq = mf.geodesic_dist(model, P, Q)
    assert np.array_equal(dpq, mf.geodesic_dist(model, Q, P))
    assert np.all(dpq <= mf.geodesic_dist(model, P, S) + mf.geodesic_dist(model, S, Q) + 1e-12)
    assert np.all(dpq <= model.diam_gd + 1e-12)
    assert np.all(mf.euclidean_dist(P, Q) <= dpq + 1e-12)


def test_mu_min_examples():
    s, c = MODELS[1], MODELS[0]
    assert mf.mu_min(s, 2.0) == 1.0
    assert mf.mu_min(s, 0.2) == pytest.approx(0.01, rel=1e-14)
    assert mf.mu_min(c, 2.0) == 1.0
    with pytest.raises(DomainError):
        mf.mu_min(s, -0.1)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
@pytest.mark.parametrize("r", [0.05, 0.4, 1.1, 1.9])
def test_mu_min_matches_monte_carlo(model, r):
    # independent oracle: fraction of uniform samples within r of a base point
    X = mf.sample_points(model, stream(17, "mu"), 400_000)
    frac = float(np.mean(mf.euclidean_dist(X, X[0]) < r))
    se = math.sqrt(max(frac * (1 - frac), 1e-6) / len(X))
    assert abs(mf.mu_min(model, r) - frac) <= 5 * se + 1e-5


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_mu_min_monotone_and_scaling(model):
    rs = np.linspace(1e-4, model.r_M, 50)
    vals = np.array([mf.mu_min(model, r) for r in rs])
    assert np.all(np.diff(vals) >= 0)
    assert np.min(vals / rs ** model.d) > 0.05


def test_tangent_frame_examples():
    f = mf.tangent_frame(MODELS[0], np.array([1.0, 0.0]))
    assert np.allclose(np.abs(f.basis), [[0.0, 1.0]])
    f = mf.tangent_frame(MODELS[1], np.array([0.0, 0.0, 1.0]))
    assert np.allclose(f.basis @ [0, 0, 1.0], 0.0, atol=1e-15)
    f = mf.tangent_frame(MODELS[2], mf.torus_point(MODELS[2], 0.0, 0.0))
    assert np.allclose(f.basis, [[0, 1, 0, 0], [0, 0, 0, 1]], atol=1e-15)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_tangent_frame_orthonormal(model):
    for p in mf.sample_points(model, stream(2, "tf"), 50):
        f = mf.tangent_frame(model, p)
        assert np.allclose(f.basis @ f.basis.T, np.eye(model.d), atol=1e-12)
        assert np.allclose(f.basis @ mf.normal_frame(model, p).T, 0.0, atol=1e-12)


def test_subspace_distance_examples():
    c = MODELS[0]
    A = mf.tangent_frame(c, np.array([1.0, 0.0]))
    B = mf.tangent_frame(c, np.array([0.0, 1.0]))
    assert mf.subspace_distance(A, A) == pytest.approx(0.0, abs=1e-15)
    assert mf.subspace_distance(A, B) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        mf.subspace_distance(A, mf.tangent_frame(MODELS[1], np.array([0, 0, 1.0])))


def _svd_oracle(A, B):
    # projector onto the orthocomplement of span(A), applied to B, then SVD
    P = np.eye(A.basis.shape[1]) - A.basis.T @ A.basis
    return np.linalg.svd(P @ B.basis.T, compute_uv=False).max()


def _nearby(model, rng, scale):
    p = mf.sample_point(model, rng)
    f = mf.tangent_frame(model, p)
    q = mf.project(model, p + scale * rng.standard_normal(model.d) @ f.basis)
    return p, q


def test_subspace_distance_nearby_sphere_points():
    s = MODELS[1]
    rng = stream(4, "sd")
    for _ in range(200):
        p, q = _nearby(s, rng, 0.004)
        sd = mf.subspace_distance(mf.tangent_frame(s, p), mf.tangent_frame(s, q))
        assert sd == pytest.approx(_svd_oracle(mf.tangent_frame(s, p), mf.tangent_frame(s, q)), abs=1e-12)
        assert sd <= 2 * np.linalg.norm(p - q) + 1e-9


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), scale=st.floats(1e-6, 5e-3))
def test_chord_geodesic_sandwich(seed, scale):
    s = MODELS[1]
    p, q = _nearby(s, stream(seed, "sandwich"), scale)
    chord = float(np.linalg.norm(p - q))
    gd = float(mf.geodesic_dist(s, p, q))
    assert chord <= gd + 1e-9
    assert gd <= chord * (1 + s.kappa * chord ** 2 / 2) + 1e-9


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), length=st.floats(1e-4, 0.09))
def test_chart_normal_displacement(seed, length):
    s = MODELS[1]
    rng = stream(seed, "chart")
    p = mf.sample_point(s, rng)
    f = mf.tangent_frame(s, p)
    v = rng.standard_normal(2) @ f.basis
    v *= length / np.linalg.norm(v)
    x = mf.sphere_chart(s, p, v)
    assert mf.on_surface(s, x[None, :], rtol=1e-12).all()
    normal = x - p - (x - p) @ f.basis.T @ f.basis
    assert np.linalg.norm(normal) <= s.kappa * length ** 2 + 1e-9


def test_chart_sphere_only():
    with pytest.raises(DomainError):
        mf.sphere_chart(MODELS[0], np.array([1.0, 0]), np.array([0, 0.1]))
