import numpy as np
import pytest

from bodyschema import (BodyMap, DistanceMatrix, JointHistogram, TactileLog,
                        conditional_entropy, information_metric,
                        joint_histogram, mds_embed, pair_distance, quantize)


def make_quantized(q, n_levels):
    q = np.asarray(q, dtype=np.uint8)
    return TactileLog(raw=q.astype(np.float32), dt=0.1, seed=0,
                      agent_fingerprint="synthetic", quantized=q,
                      n_levels=n_levels)


def entropy_oracle(counts, total, direction):
    """Direct double-sum over the joint histogram, the textbook way."""
    counts = np.asarray(counts, dtype=float)
    h = 0.0
    for x in range(counts.shape[0]):
        for y in range(counts.shape[1]):
            pxy = counts[x, y] / total
            if pxy == 0:
                continue
            marg = counts[x, :].sum() if direction == "j_given_i" else counts[:, y].sum()
            h -= pxy * np.log2(counts[x, y] / marg)
    return h


def test_conditional_entropy_identical_channels():
    hist = JointHistogram(counts=np.diag([3, 5, 2]), total=10)
    assert conditional_entropy(hist, "j_given_i") == pytest.approx(0.0, abs=1e-12)
    assert conditional_entropy(hist, "i_given_j") == pytest.approx(0.0, abs=1e-12)


def test_conditional_entropy_independent_uniform():
    hist = JointHistogram(counts=np.full((2, 2), 25), total=100)
    assert conditional_entropy(hist, "j_given_i") == pytest.approx(1.0)
    assert conditional_entropy(hist, "i_given_j") == pytest.approx(1.0)


def test_conditional_entropy_hand_counts():
    counts = np.array([[2, 1], [1, 4]])
    hist = JointHistogram(counts=counts, total=8)
    for direction in ("j_given_i", "i_given_j"):
        assert conditional_entropy(hist, direction) == pytest.approx(
            entropy_oracle(counts, 8, direction), abs=1e-12)


def test_conditional_entropy_random_matches_oracle_and_range():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = rng.integers(2, 8)
        counts = rng.integers(0, 30, size=(n, n))
        counts[0, 0] += 1   # ensure non-empty
        hist = JointHistogram(counts=counts, total=int(counts.sum()))
        for direction in ("j_given_i", "i_given_j"):
            h = conditional_entropy(hist, direction)
            assert h == pytest.approx(entropy_oracle(counts, counts.sum(), direction),
                                      abs=1e-10)
            assert -1e-12 <= h <= np.log2(n) + 1e-12


def test_conditional_entropy_empty_histogram():
    with pytest.raises(ValueError):
        conditional_entropy(JointHistogram(counts=np.zeros((2, 2)), total=0))


def test_metric_zero_diagonal_and_duplicates():
    rng = np.random.default_rng(1)
    ch = rng.integers(1, 5, size=200)
    q = np.stack([ch, ch, rng.integers(1, 5, size=200)])
    D = information_metric(make_quantized(q, 4)).d_matrix
    assert np.all(np.diag(D) == 0.0)
    assert D[0, 1] == pytest.approx(0.0, abs=1e-12)


def test_metric_independent_uniform_binary():
    # exact counts: all four joint symbols equally often
    a = np.array([1, 1, 2, 2] * 64)
    b = np.array([1, 2, 1, 2] * 64)
    D = information_metric(make_quantized(np.stack([a, b]), 2)).d_matrix
    assert D[0, 1] == pytest.approx(2.0, abs=1e-12)


def test_metric_matches_per_pair_oracle():
    # blocked matrix-product path vs direct histogram per pair
    rng = np.random.default_rng(2)
    q = rng.integers(1, 7, size=(13, 400)).astype(np.uint8)
    log = make_quantized(q, 6)
    D = information_metric(log, block=4).d_matrix
    for i in range(13):
        for j in range(i + 1, 13):
            hist = joint_histogram(q[i], q[j], 6)
            assert D[i, j] == pytest.approx(pair_distance(hist), abs=1e-9)


def test_metric_axioms_random_logs():
    rng = np.random.default_rng(3)
    for _ in range(5):
        raw = rng.random((15, 600)).astype(np.float32)
        log = quantize(TactileLog(raw=raw, dt=0.1, seed=0, agent_fingerprint="x"), 5)
        D = information_metric(log).d_matrix
        assert np.array_equal(D, D.T)
        assert np.all(np.diag(D) == 0)
        slack = (D[:, :, None] + D[None, :, :] - D[:, None, :]).min()
        assert slack > -1e-9


def test_metric_invariant_to_symbol_relabeling():
    rng = np.random.default_rng(4)
    q = rng.integers(1, 6, size=(6, 300)).astype(np.uint8)
    D1 = information_metric(make_quantized(q, 5)).d_matrix
    perm = np.array([0, 3, 1, 5, 2, 4])   # permutation of {1..5} at indices 1..5
    q2 = perm[q]
    D2 = information_metric(make_quantized(q2, 5)).d_matrix
    assert np.allclose(D1, D2, atol=1e-12)


def test_metric_stride_subsamples():
    rng = np.random.default_rng(5)
    q = rng.integers(1, 4, size=(4, 100)).astype(np.uint8)
    D_full = information_metric(make_quantized(q[:, ::2], 3)).d_matrix
    D_strided = information_metric(make_quantized(q, 3), stride=2).d_matrix
    assert np.allclose(D_full, D_strided)


def test_metric_requires_quantized():
    log = TactileLog(raw=np.zeros((2, 10), dtype=np.float32), dt=0.1, seed=0,
                     agent_fingerprint="x")
    with pytest.raises(ValueError):
        information_metric(log)


def procrustes_error(X, Y):
    """RMS residual after optimal translation/rotation/reflection of X onto Y."""
    Xc = X - X.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    U, _, Vt = np.linalg.svd(Xc.T @ Yc)
    R = U @ Vt
    return np.sqrt(np.mean(np.sum((Xc @ R - Yc) ** 2, axis=1)))


def euclidean_distances(X):
    diff = X[:, None, :] - X[None, :, :]
    return np.sqrt(np.square(diff).sum(axis=2))


def test_mds_equilateral_triangle():
    D = np.ones((3, 3)) - np.eye(3)
    bmap = mds_embed(DistanceMatrix(D), 2)
    rec = euclidean_distances(bmap.points)
    assert np.allclose(rec + np.eye(3), np.ones((3, 3)), atol=1e-9)


def test_mds_roundtrip_random_configurations():
    rng = np.random.default_rng(6)
    for _ in range(10):
        n, d = int(rng.integers(5, 40)), int(rng.integers(2, 4))
        X = rng.normal(size=(n, d))
        D = euclidean_distances(X)
        bmap = mds_embed(DistanceMatrix(D), d)
        assert procrustes_error(bmap.points, X) < 1e-6


def test_mds_rank_two_input_higher_dim():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(12, 2))
    D = euclidean_distances(X)
    b2 = mds_embed(DistanceMatrix(D), 2)
    b5 = mds_embed(DistanceMatrix(D), 5)
    assert np.max(np.abs(b5.points[:, 2:])) < 1e-6
    assert np.allclose(b5.points[:, :2], b2.points, atol=1e-9)


def test_mds_deterministic_sign_convention():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(10, 3))
    D = euclidean_distances(X)
    a = mds_embed(DistanceMatrix(D), 3)
    b = mds_embed(DistanceMatrix(D), 3)
    assert np.array_equal(a.points, b.points)
    for k in range(3):
        col = a.points[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size:
            assert col[nz[0]] > 0


def test_mds_validation_errors():
    D = np.ones((4, 4)) - np.eye(4)
    with pytest.raises(ValueError):
        mds_embed(DistanceMatrix(D), 0)
    with pytest.raises(ValueError):
        mds_embed(DistanceMatrix(D), 4)
    bad = D.copy()
    bad[0, 1] = 2.0
    with pytest.raises(ValueError):
        mds_embed(DistanceMatrix(bad), 2)


def test_mds_zero_matrix():
    D = np.zeros((6, 6))
    bmap = mds_embed(DistanceMatrix(D), 3)
    assert np.all(bmap.points == 0)
