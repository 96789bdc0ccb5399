import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from leakbench import DataError, KnnConfig, PreconditionError, knn_fit, knn_predict, rank_features, ttest_scores
from leakbench.model import METRICS, pairwise_distances


def oracle_distance(a, b, metric):
    if metric == "euclidean":
        return sum((x - y) ** 2 for x, y in zip(a, b)) ** 0.5
    if metric == "manhattan":
        return sum(abs(x - y) for x, y in zip(a, b))
    if metric == "chebyshev":
        return max(abs(x - y) for x, y in zip(a, b))
    na, nb = sum(x * x for x in a) ** 0.5, sum(y * y for y in b) ** 0.5
    sim = 0.0 if na == 0 or nb == 0 else sum(x * y for x, y in zip(a, b)) / (na * nb)
    return 1.0 - sim


def oracle_predict(train, labels, query, k, metric):
    """Exhaustive sort by (distance, row index), majority vote, nearest row on ties."""
    out = []
    for q in query:
        d = [(oracle_distance(q, row, metric), i) for i, row in enumerate(train)]
        d.sort()
        votes = [labels[i] for _, i in d[:k]]
        ones = sum(votes)
        if 2 * ones == k:
            out.append(votes[0])
        else:
            out.append(int(2 * ones > k))
    return out


def test_k_exceeds_rows():
    with pytest.raises(PreconditionError):
        knn_fit(np.zeros((3, 2)), [0, 1, 0], KnnConfig(k=5))


def test_non_finite_training_rows():
    X = np.zeros((4, 2))
    X[1, 1] = np.inf
    with pytest.raises(DataError):
        knn_fit(X, [0, 1, 0, 1], KnnConfig(k=1))


def test_single_class_warns():
    with pytest.warns(RuntimeWarning):
        knn_fit(np.eye(3), [1, 1, 1], KnnConfig(k=1))


def test_dimension_mismatch():
    model = knn_fit(np.eye(3), [0, 1, 0], KnnConfig(k=1))
    with pytest.raises(PreconditionError):
        knn_predict(model, np.zeros((2, 4)))


@pytest.mark.parametrize("metric", METRICS)
def test_k1_reproduces_training_labels(metric):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 5))
    y = rng.integers(0, 2, size=30)
    model = knn_fit(X, y, KnnConfig(k=1, metric=metric))
    assert np.array_equal(knn_predict(model, X), y)


def test_standardized_rows_centered():
    X = np.random.default_rng(0).normal(5, 3, size=(40, 4))
    model = knn_fit(X, np.arange(40) % 2, KnnConfig(k=3, standardize=True))
    np.testing.assert_allclose(model.train.mean(axis=0), 0, atol=1e-12)


def test_one_dimensional_examples():
    A, B = 0, 1
    X = np.array([[0.0], [1.0], [10.0]])
    y = [A, A, B]
    assert knn_predict(knn_fit(X, y, KnnConfig(k=1)), [[0.4]]).tolist() == [A]
    k3 = knn_fit(X, y, KnnConfig(k=3))
    assert knn_predict(k3, [[-5.0], [9.9], [100.0]]).tolist() == [A, A, A]


def test_tie_goes_to_nearest_row_by_index():
    A, B = 1, 0
    model = knn_fit(np.array([[0.0], [2.0]]), [A, B], KnnConfig(k=2))
    assert knn_predict(model, [[1.0]]).tolist() == [A]


def test_brute_force_oracle_1000_cases():
    rng = np.random.default_rng(2024)
    for case in range(1000):
        n = int(rng.integers(1, 51))
        q = int(rng.integers(1, 11))
        d = int(rng.integers(1, 5))
        k = int(rng.integers(1, n + 1))
        metric = METRICS[case % 4]
        # small integer grid makes distance ties common
        X = rng.integers(-2, 3, size=(n, d)).astype(float)
        Q = rng.integers(-2, 3, size=(q, d)).astype(float)
        y = rng.integers(0, 2, size=n)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # single-class draws are legal here
            model = knn_fit(X, y, KnnConfig(k=k, metric=metric))
        got = knn_predict(model, Q).tolist()
        want = oracle_predict(X.tolist(), y.tolist(), Q.tolist(), k, metric)
        assert got == want, (case, n, k, metric)


vectors = st.lists(st.floats(-100, 100, allow_nan=False, width=32), min_size=3, max_size=3)


@settings(max_examples=100, deadline=None)
@given(vectors, vectors, st.sampled_from(METRICS))
def test_metric_symmetry_and_identity(a, b, metric):
    A, B = np.array([a]), np.array([b])
    d_ab = pairwise_distances(A, B, metric)[0, 0]
    d_ba = pairwise_distances(B, A, metric)[0, 0]
    assert d_ab == pytest.approx(d_ba, abs=1e-12)
    assert d_ab >= 0
    if metric == "cosine":
        # identity holds on unit-normalised vectors
        if np.linalg.norm(a) > 1e-3:
            unit = A / np.linalg.norm(A)
            assert pairwise_distances(unit, unit, metric)[0, 0] == pytest.approx(0, abs=1e-9)
    else:
        assert pairwise_distances(A, A, metric)[0, 0] == 0
        if a != b:
            assert d_ab > 0


def test_cosine_zero_vector():
    d = pairwise_distances(np.zeros((1, 3)), np.array([[1.0, 2.0, 3.0]]), "cosine")
    assert d[0, 0] == 1.0


def test_t_statistic_direct_formula():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    t = ttest_scores(X, [0, 0, 1, 1])
    assert t[0] == pytest.approx(2 / np.sqrt(0.5), rel=1e-12)
    assert t[0] == pytest.approx(2.828, abs=5e-4)


def test_t_matches_scipy():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(37, 9))
    y = rng.integers(0, 2, size=37)
    ref = np.abs(stats.ttest_ind(X[y == 1], X[y == 0], equal_var=True).statistic)
    np.testing.assert_allclose(ttest_scores(X, y), ref, rtol=1e-12)


def test_t_constant_and_degenerate_columns():
    X = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 5.0], [1.0, 5.0]])
    t = ttest_scores(X, [0, 0, 1, 1])
    assert t[0] == 0 and np.isinf(t[1])


def test_t_requires_two_rows_per_class():
    with pytest.raises(DataError):
        ttest_scores(np.zeros((4, 1)), [0, 0, 0, 0])
    with pytest.raises(DataError):
        ttest_scores(np.zeros((4, 1)), [0, 0, 0, 1])


def test_null_max_t_band():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(40, 128))
    base = np.repeat([0, 1], 20)
    maxima = [ttest_scores(X, rng.permutation(base)).max() for _ in range(200)]
    assert 2.5 <= np.median(maxima) <= 4.5
    # independent-columns oracle: P(max |t| in band) = q(4.5)^F - q(2.5)^F, df = 38
    q = lambda c: stats.t.cdf(c, 38) - stats.t.cdf(-c, 38)
    expected = q(4.5) ** 128 - q(2.5) ** 128
    observed = np.mean([(2.5 <= m <= 4.5) for m in maxima])
    assert observed >= 0.75
    assert abs(observed - expected) <= 3 * np.sqrt(expected * (1 - expected) / len(maxima))


def test_rank_examples():
    assert rank_features([0.1, 3.0, 0.1]).order.tolist() == [1, 0, 2]
    assert rank_features([2.0] * 5).order.tolist() == [0, 1, 2, 3, 4]
    X = np.array([[0.0, 4.0], [1.0, 4.0], [2.0, 4.0], [3.0, 4.0]])
    ranking = rank_features(ttest_scores(X, [0, 0, 1, 1]))
    assert ranking.order.tolist() == [0, 1]


def test_rank_places_infinite_first():
    assert rank_features([1.0, np.inf, 0.0]).order.tolist() == [1, 0, 2]


def test_ranking_ignores_excluded_rows():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(30, 12))
    y = np.arange(30) % 2
    rows = np.arange(20)
    before = rank_features(ttest_scores(X, y, rows), rows)
    X[20:] = rng.normal(100, 50, size=(10, 12))
    after = rank_features(ttest_scores(X, y, rows), rows)
    assert np.array_equal(before.order, after.order)
    assert np.array_equal(before.scores, after.scores)


def test_ranking_csv():
    text = rank_features([0.5, 2.0]).to_csv(["a", "b"])
    assert text.splitlines() == ["rank,feature_index,column_name,score", "0,1,b,2", "1,0,a,0.5"]
