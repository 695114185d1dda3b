import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_dataset
from catdissim.cooccur import build_cooccurrence, marginals, profile
from catdissim.dataset import parse_csv, subset
from catdissim.errors import DataError


def test_perfect_association_gives_identity():
    ds = parse_csv("a,b\nx,x\ny,y\nx,x\n")
    model = build_cooccurrence(ds)
    assert np.array_equal(profile(model, 0, 1).matrix, np.eye(2))


def test_independent_uniform_profiles():
    ds = parse_csv("a,b\n0,0\n0,1\n1,0\n1,1\n")
    model = build_cooccurrence(ds)
    assert np.allclose(profile(model, 0, 1).matrix, 0.5)
    assert model.joint(0, 1).sum() == 1


def test_marginals_uniform():
    ds = parse_csv("a\n" + "\n".join("wxyz" * 2) + "\n")
    model = build_cooccurrence(ds)
    assert marginals(model, 0).tolist() == [0.25] * 4


def test_diagonal_profile_rejected(toy):
    model = build_cooccurrence(toy)
    with pytest.raises(DataError):
        profile(model, 1, 1)


def test_zero_count_levels(toy):
    part = subset(toy, [0, 1])  # level "y" of c2 is unobserved
    model = build_cooccurrence(part)
    R = profile(model, 1, 0).matrix
    assert np.isnan(R[1]).all()
    assert model.unobserved() == {1: [1]}
    with pytest.raises(DataError, match="c2"):
        build_cooccurrence(part, strict=True)


def test_full_p_blocks(toy):
    model = build_cooccurrence(toy)
    P = model.full_p()
    assert P.shape == (4, 4)
    assert np.allclose(P[:2, :2], np.diag([2 / 3, 1 / 3]))
    assert np.allclose(P, P.T)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_invariants(seed):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, int(rng.integers(3, 50)), int(rng.integers(2, 5)), 4)
    model = build_cooccurrence(ds)
    n = ds.n_rows
    for i in range(ds.n_vars):
        for j in range(ds.n_vars):
            if i == j:
                continue
            counts = model.joint_counts(i, j)
            assert counts.dtype.kind == "i"
            assert counts.sum() == n
            assert np.array_equal(np.rint(model.joint(i, j) * n), counts)
            assert np.array_equal(model.joint(i, j), model.joint(j, i).T)
            lhs = model.marginals.p(i)[:, None] * model.profile(i, j).matrix
            rhs = (model.marginals.p(j)[:, None] * model.profile(j, i).matrix).T
            assert np.abs(lhs - rhs).max() <= 1e-12
            assert np.abs(model.profile(i, j).matrix.sum(axis=1) - 1).max() <= 1e-12
