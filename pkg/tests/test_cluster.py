import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_basis, random_spd, random_spd_stack
from mrpc import cluster, data, kernel, manifold
from mrpc.cluster import KmeansConfig
from mrpc.errors import ConfigError, DegenerateSpectrum, InvalidSize, TooFewPoints
from mrpc.evaluation import purity, rand_index
from mrpc.kernel import GramMatrix, KernelSpec


def block_gram(sizes, within=0.99, across=0.01):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    K = np.where(labels[:, None] == labels[None, :], within, across)
    np.fill_diagonal(K, 1.0)
    return K, labels


# -- config -----------------------------------------------------------------

def test_config_validation():
    for bad in (dict(m=0), dict(m=2, restarts=0), dict(m=2, max_iter=0), dict(m=2, tol=-1),
                dict(m=2, init="kmeans++")):
        with pytest.raises(ConfigError):
            KmeansConfig(**bad)


def test_too_few_points():
    with pytest.raises(TooFewPoints):
        cluster.kmeans(np.zeros((2, 1)), KmeansConfig(m=3))


# -- Euclidean K-means ------------------------------------------------------

def test_kmeans_one_dimensional_example():
    x = np.array([0.0, 0.1, 10.0, 10.1])
    res = cluster.kmeans(x, KmeansConfig(m=2, seed=0))
    assert res.labels[0] == res.labels[1] != res.labels[2] == res.labels[3]
    assert res.inertia == pytest.approx(0.01, abs=1e-12)
    assert res.converged


def test_kmeans_m_equals_n(rng):
    X = rng.standard_normal((6, 2))
    res = cluster.kmeans(X, KmeansConfig(m=6))
    assert res.inertia == 0.0
    assert sorted(res.labels) == list(range(6))


def test_kmeans_single_cluster(rng):
    X = rng.standard_normal((30, 3))
    res = cluster.kmeans(X, KmeansConfig(m=1))
    assert res.inertia == pytest.approx(len(X) * X.var(axis=0).sum(), rel=1e-12)


def test_kmeans_trace_nonincreasing(rng):
    X = rng.standard_normal((200, 4))
    res = cluster.kmeans(X, KmeansConfig(m=8, restarts=1, seed=3))
    assert all(b <= a + 1e-9 for a, b in zip(res.trace, res.trace[1:]))
    assert res.trace[-1] == res.inertia


def test_kmeans_deterministic(rng):
    X = rng.standard_normal((50, 2))
    a = cluster.kmeans(X, KmeansConfig(m=3, seed=9))
    b = cluster.kmeans(X, KmeansConfig(m=3, seed=9))
    np.testing.assert_array_equal(a.labels, b.labels)
    assert a.inertia == b.inertia


def test_kmeans_keeps_all_clusters_alive():
    # five copies of one point plus one outlier; m=3 forces a repair
    X = np.array([[0.0]] * 5 + [[1.0]])
    res = cluster.kmeans(X, KmeansConfig(m=3, restarts=3))
    assert len(np.unique(res.labels)) == 3


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), scale=st.floats(0.01, 100.0))
def test_kmeans_scale_invariance(seed, scale):
    X = np.random.default_rng(seed).standard_normal((25, 2))
    cfg = KmeansConfig(m=3, seed=seed % 1000)
    a, b = cluster.kmeans(X, cfg), cluster.kmeans(scale * X, cfg)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert b.inertia == pytest.approx(scale ** 2 * a.inertia, rel=1e-6, abs=1e-12)


# -- kernel K-means ---------------------------------------------------------

def test_kernel_kmeans_block_gram():
    K, truth = block_gram([6, 6])
    res = cluster.kernel_kmeans(K, KmeansConfig(m=2))
    assert purity(res.labels, truth) == 1.0


def test_kernel_kmeans_m_equals_n(rng):
    K = kernel.gram(KernelSpec("gaussian_led", 1.0), random_spd_stack(rng, 5, 2))
    assert cluster.kernel_kmeans(K, KmeansConfig(m=5)).inertia == pytest.approx(0.0, abs=1e-12)


def test_kernel_kmeans_linear_kernel_equivalence(rng):
    for trial in range(10):
        X = rng.standard_normal((20, 3))
        cfg = KmeansConfig(m=3, seed=trial)
        a = cluster.kmeans(X, cfg)
        b = cluster.kernel_kmeans(X @ X.T, cfg)
        np.testing.assert_array_equal(a.labels, b.labels)
        assert b.inertia == pytest.approx(a.inertia, rel=1e-9)


def test_kernel_kmeans_rejects_non_square():
    with pytest.raises(ConfigError):
        cluster.kernel_kmeans(np.ones((3, 4)), KmeansConfig(m=2))


# -- LogE embedding ---------------------------------------------------------

def test_loge_examples():
    np.testing.assert_allclose(cluster.loge_embed([np.eye(2)]), [[0.0, 0.0, 0.0]])
    np.testing.assert_allclose(cluster.loge_embed([np.diag([math.e, 1.0])]), [[1.0, 0.0, 0.0]],
                               atol=1e-14)


def test_loge_preserves_led(rng):
    for _ in range(20):
        X, Y = random_spd(rng, 4), random_spd(rng, 4)
        v = cluster.loge_embed([X, Y])
        assert np.sum((v[0] - v[1]) ** 2) == pytest.approx(manifold.led_distance(X, Y), abs=1e-8)


def test_loge_grassmann_is_flat_basis(rng):
    B = random_basis(rng, 5, 2)
    np.testing.assert_array_equal(cluster.loge_embed([B], "grassmann")[0], B.ravel())


# -- intrinsic K-means ------------------------------------------------------

def test_intrinsic_identical_points():
    X = np.diag([2.0, 3.0])
    res = cluster.intrinsic_kmeans([X] * 5, "spd", KmeansConfig(m=1))
    assert res.inertia == 0.0 and res.iterations == 1 and res.converged


def test_intrinsic_identical_points_several_clusters():
    res = cluster.intrinsic_kmeans([np.eye(2)] * 6, "spd", KmeansConfig(m=2, restarts=2))
    assert res.inertia == 0.0 and res.iterations <= 2


def test_intrinsic_two_tight_clusters(rng):
    pts, truth = [], []
    for k, c in enumerate([np.eye(2), 9 * np.eye(2)]):
        for _ in range(10):
            v = 0.05 * rng.standard_normal((2, 2))
            pts.append(manifold.exp_map(c, 0.5 * (v + v.T), "spd"))
            truth.append(k)
    res = cluster.intrinsic_kmeans(pts, "spd", KmeansConfig(m=2, restarts=3))
    assert purity(res.labels, truth) == 1.0


def test_intrinsic_m_equals_n(rng):
    pts = random_spd_stack(rng, 4, 2)
    res = cluster.intrinsic_kmeans(pts, "spd", KmeansConfig(m=4, restarts=2))
    assert res.inertia == pytest.approx(0.0, abs=1e-12)


def test_intrinsic_grassmann():
    ds = data.gen_grassmann_clusters(data.GrassmannClusterParams(m=2, per_cluster=8, q=6, d=2,
                                                                 noise_sigma=0.05, seed=4))
    res = cluster.intrinsic_kmeans(ds.points, "grassmann", KmeansConfig(m=2, restarts=3))
    assert purity(res.labels, ds.labels) == 1.0


def test_intrinsic_iteration_cap():
    assert cluster.INTRINSIC_MAX_ITER == 100


# -- KPCA K-means -----------------------------------------------------------

def test_kpca_kmeans_block_gram():
    K, truth = block_gram([5, 5])
    res = cluster.kpca_kmeans(GramMatrix(K, KernelSpec("gaussian_led", 1.0)), 2,
                              KmeansConfig(m=2))
    assert purity(res.labels, truth) == 1.0


def test_kpca_kmeans_matches_kernel_kmeans():
    spec = KernelSpec("gaussian_led", 0.5)
    matches = total = 0
    for s in range(10):
        ds = data.gen_spd_clusters(data.SpdClusterParams(m=2, per_cluster=10, d=3,
                                                         noise_sigma=0.3, seed=s))
        G = kernel.gram(spec, ds.points)
        for seed in range(10):
            cfg = KmeansConfig(m=2, seed=seed)
            a = cluster.kpca_kmeans(G, len(ds) - 1, cfg)
            b = cluster.kernel_kmeans(G, cfg)
            matches += rand_index(a.labels, b.labels) == 1.0
            total += 1
    assert matches / total >= 0.9


def test_kpca_kmeans_identical_points():
    with pytest.raises(DegenerateSpectrum):
        cluster.kpca_kmeans(GramMatrix(np.ones((4, 4)), KernelSpec("gaussian_led", 1.0)), None,
                            KmeansConfig(m=2))


def test_kpca_kmeans_keep_range():
    K, _ = block_gram([3, 3])
    with pytest.raises(InvalidSize):
        cluster.kpca_kmeans(GramMatrix(K, KernelSpec("gaussian_led", 1.0)), 6, KmeansConfig(m=2))
