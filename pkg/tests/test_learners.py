import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import random_dataset
from catdissim.dataset import parse_csv, split_folds, subset
from catdissim.delta import BlockDiagonalDelta
from catdissim.distance import DistanceMatrix, pairwise_distances
from catdissim.errors import DataError
from catdissim.learners import (
    DEFAULT_K_GRID,
    Labeling,
    accuracy,
    adjusted_rand_index,
    cross_validate,
    knn_predict,
    pam_assign,
    pam_fit,
)
from catdissim.measures import build_delta


def test_knn_nearest_and_majority():
    train = parse_csv("a,b\nx,u\ny,v\ny,w\nz,w\n")
    test = parse_csv("a,b\nx,u\n", schema=train.variables)
    delta = build_delta("matching", train)
    assert knn_predict(train, ["A", "B", "B", "C"], test, delta, 1).labels() == ["A"]
    test = parse_csv("a,b\ny,w\n", schema=train.variables)
    assert knn_predict(train, ["A", "B", "B", "A"], test, delta, 3).labels() == ["B"]


def test_knn_tie_broken_by_summed_distance():
    train = parse_csv("a\np\nq\nr\n")
    test = parse_csv("a\nr\n", schema=train.variables)
    # distances from r: p = 0.2, q = 0.5
    block = np.array([[0, 1, 0.2], [1, 0, 0.5], [0.2, 0.5, 0]])
    delta = BlockDiagonalDelta.from_matrices([block])
    sub = subset(train, [0, 1])
    assert knn_predict(sub, ["B", "A"], test, delta, 2).labels() == ["B"]
    block = np.array([[0, 1, 0.5], [1, 0, 0.2], [0.5, 0.2, 0]])
    delta = BlockDiagonalDelta.from_matrices([block])
    assert knn_predict(sub, ["B", "A"], test, delta, 2).labels() == ["A"]


def test_knn_k_too_large_and_self_prediction():
    rng = np.random.default_rng(0)
    ds = random_dataset(rng, 40, 6, 5)
    labels = [f"c{i % 3}" for i in range(40)]
    delta = build_delta("matching", ds)
    with pytest.raises(DataError):
        knn_predict(ds, labels, ds, delta, 41)
    D = pairwise_distances(ds, delta).values
    unique = [i for i in range(40) if (D[i] == 0).sum() == 1]
    pred = knn_predict(ds, labels, ds, delta, 1).labels()
    assert all(pred[i] == labels[i] for i in unique)


def test_knn_checks_delta_source():
    ds = parse_csv("a,b\nx,u\ny,v\nx,v\n")
    delta = build_delta("iof", ds)
    with pytest.raises(DataError, match="training"):
        knn_predict(subset(ds, [0, 1]), ["A", "B"], ds, delta, 1)


def blobs():
    return parse_csv("a,b\nx,u\nx,u\nx,u\ny,v\ny,v\n")


def test_pam_separable():
    ds = blobs()
    D = pairwise_distances(ds, build_delta("matching", ds))
    fit = pam_fit(D, 2, seed=3)
    assert fit.cost == 0 and fit.converged
    assert adjusted_rand_index(fit.labels, [0, 0, 0, 1, 1]) == 1


def test_pam_k_equals_n_and_errors():
    rng = np.random.default_rng(1)
    ds = random_dataset(rng, 8, 3, 4)
    D = pairwise_distances(ds, build_delta("eskin", ds))
    fit = pam_fit(D, 8, seed=0)
    assert sorted(fit.medoids.tolist()) == list(range(8)) and fit.cost == 0
    with pytest.raises(DataError):
        pam_fit(D, 9)
    with pytest.raises(DataError):
        pam_fit(DistanceMatrix(np.array([[0, 1], [2, 0.0]])), 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 5))
def test_pam_determinism_and_cost(seed, k):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, 30, 4, 4)
    D = pairwise_distances(ds, build_delta("goodall3", ds) if seed % 2 else build_delta("matching", ds))
    a, b = pam_fit(D, k, seed=seed), pam_fit(D, k, seed=seed)
    assert np.array_equal(a.medoids, b.medoids) and np.array_equal(a.labels, b.labels)
    h = a.cost_history
    assert all(y <= x + 1e-9 for x, y in zip(h, h[1:]))
    assert len(set(a.medoids.tolist())) == k
    # scaling distances changes no assignment (a power of two keeps it exact)
    scaled = DistanceMatrix(4 * D.values, True, D.zero_diagonal)
    c = pam_fit(scaled, k, seed=seed)
    assert np.array_equal(c.medoids, a.medoids)
    assert c.cost == 4 * a.cost


def test_pam_converged_is_fixed_point():
    rng = np.random.default_rng(3)
    ds = random_dataset(rng, 40, 4, 4)
    D = pairwise_distances(ds, build_delta("matching", ds)).values
    fit = pam_fit(DistanceMatrix(D, True, True), 3, seed=2)
    assert fit.converged
    labels = np.argmin(D[:, fit.medoids], axis=1)
    for c, m in enumerate(fit.medoids):
        members = np.flatnonzero(labels == c)
        sums = D[np.ix_(members, members)].sum(axis=1)
        assert sums[members.tolist().index(m)] == sums.min()


def test_pam_assign():
    ds = blobs()
    delta = build_delta("matching", ds)
    test = parse_csv("a,b\ny,v\nx,u\nx,v\n", schema=ds.variables)
    assert pam_assign(ds, [0, 3], test, delta).tolist() == [1, 0, 0]
    assert pam_assign(ds, [3, 0], test, delta).tolist() == [0, 1, 0]
    assert pam_assign(ds, [4], test, delta).tolist() == [0, 0, 0]


def test_accuracy():
    assert accuracy(["a", "b"], ["a", "b"]) == 1
    assert accuracy(["a", "a"], ["b", "b"]) == 0
    assert accuracy([1, 2, 3, 4], [1, 2, 3, 0]) == 0.75


def test_ari_examples():
    assert adjusted_rand_index([1, 1, 2, 2], [1, 2, 1, 2]) == -0.5
    assert adjusted_rand_index([1, 1, 2, 2], ["b", "b", "a", "a"]) == 1
    assert adjusted_rand_index([0, 0, 0], [0, 0, 0]) == 1
    assert adjusted_rand_index([0, 1, 2], [0, 0, 0]) == 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=3, max_size=25))
def test_ari_against_pair_counting(pairs):
    a, b = zip(*pairs)
    got = adjusted_rand_index(a, b)
    assert got <= 1 + 1e-12
    total = len(a) * (len(a) - 1) / 2
    sa = sum(x == y for i, x in enumerate(a) for y in a[i + 1:])
    sb = sum(x == y for i, x in enumerate(b) for y in b[i + 1:])
    if sa * sb / total != (sa + sb) / 2:
        assert got == pytest.approx(oracles.ari(a, b), abs=1e-12)
    same = len(set(zip(a, b))) == len(set(a)) == len(set(b))
    assert (got == 1) == same


def test_cv_defaults_and_perfect_copy():
    rng = np.random.default_rng(4)
    ds = random_dataset(rng, 60, 3, 3, min_levels=3)
    labels = [f"y{c}" for c in ds.codes[:, 0]]
    report = cross_validate(ds, labels, ["supervised_tvd"], k_grid=[1], plan=split_folds(ds, labels, 5, 2, 0))
    assert all(c.value == 1.0 for c in report.cells)
    assert DEFAULT_K_GRID == (1, 3, 5, 9, 15, 21)
    plan = split_folds(ds, labels)
    assert (plan.n_folds, plan.n_repeats) == (5, 10)


def test_cv_records_cell_failures():
    ds = parse_csv("a,b\n" + "\n".join(f"{'r' if i == 0 else 'x' if i % 2 else 'y'},{i % 3}" for i in range(20)) + "\n")
    labels = [f"c{i % 2}" for i in range(20)]
    plan = split_folds(ds, labels, 5, 1, 0)
    report = cross_validate(ds, labels, ["iof"], k_grid=[1], plan=plan)
    errors = [c for c in report.cells if c.error]
    assert len(errors) == 1 and "UnseenCategoryError" in errors[0].error
    ok = cross_validate(ds, labels, ["iof"], k_grid=[1], plan=plan, unseen="max")
    assert not any(c.error for c in ok.cells)


def test_cv_threads_and_scaling_invariance():
    rng = np.random.default_rng(5)
    ds = random_dataset(rng, 50, 4, 4)
    labels = [f"c{i % 2}" for i in range(50)]
    plan = split_folds(ds, labels, 5, 2, 1)
    a = cross_validate(ds, labels, ["matching", "eskin", "tvd"], k_grid=[1, 3], plan=plan, threads=1)
    b = cross_validate(ds, labels, ["matching", "eskin", "tvd"], k_grid=[1, 3], plan=plan, threads=4)
    assert a.cells_csv() == b.cells_csv() and a.summary_csv() == b.summary_csv()
    # eskin is a rescaled matching when all variables share q; predictions match
    same_q = random_dataset(rng, 50, 4, 3, min_levels=3)
    r = cross_validate(same_q, labels, ["matching", "eskin"], k_grid=[3], plan=plan)
    sm = [c.value for c in r.cells if c.measure == "matching"]
    es = [c.value for c in r.cells if c.measure == "eskin"]
    assert sm == es
    p = cross_validate(same_q, labels, ["matching", "eskin"], plan=plan, task="pam")
    assert [c.value for c in p.cells if c.measure == "matching"] == [c.value for c in p.cells if c.measure == "eskin"]


def test_labeling():
    y = Labeling.from_values(["b", "a", "b"])
    assert y.n_classes == 2 and y.labels() == ["b", "a", "b"]
    assert y.take([1]).labels() == ["a"]
