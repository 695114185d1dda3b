"""Timing comparisons: profile TVD vs partition enumeration, gather vs dense distances."""
from __future__ import annotations

import time

import numpy as np

from .association import ahmad_dey_oracle, phi_tvd
from .dataset import CategoricalDataset, VariableSchema
from .distance import naive_pairwise_dense, pairwise_distances
from .independent import build_matching


def _per_call(func, *args, min_time: float = 0.05, max_calls: int = 10_000) -> float:
    calls = 0
    start = time.perf_counter()
    while True:
        func(*args)
        calls += 1
        elapsed = time.perf_counter() - start
        if elapsed >= min_time or calls >= max_calls:
            return elapsed / calls


def random_profile_pair(q: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    return rng.dirichlet(np.ones(q)), rng.dirichlet(np.ones(q))


def bench_tvd(qs=(4, 8, 12, 16), seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    rows = []
    for q in qs:
        r_a, r_b = random_profile_pair(q, rng)
        t_tvd = _per_call(phi_tvd, r_a, r_b)
        t_oracle = _per_call(ahmad_dey_oracle, r_a, r_b)
        rows.append({
            "q": q,
            "partitions": 2**q - 2,
            "tvd_seconds": t_tvd,
            "oracle_seconds": t_oracle,
            "speedup": t_oracle / t_tvd,
            "abs_diff": abs(phi_tvd(r_a, r_b) - ahmad_dey_oracle(r_a, r_b)),
        })
    return rows


def random_dataset(n: int, n_vars: int, max_levels: int, rng: np.random.Generator) -> CategoricalDataset:
    q = rng.integers(2, max_levels + 1, size=n_vars)
    codes = np.column_stack([rng.integers(qj, size=n) for qj in q])
    variables = tuple(
        VariableSchema(f"V{j + 1}", tuple(f"c{c}" for c in range(qj))) for j, qj in enumerate(q)
    )
    return CategoricalDataset(variables, codes)


def bench_distances(n: int = 1000, n_vars: int = 10, max_levels: int = 5, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    ds = random_dataset(n, n_vars, max_levels, rng)
    delta = build_matching(ds.variables)
    t0 = time.perf_counter()
    gather = pairwise_distances(ds, delta)
    t1 = time.perf_counter()
    dense = naive_pairwise_dense(ds, delta)
    t2 = time.perf_counter()
    return {
        "n": n,
        "n_vars": n_vars,
        "gather_seconds": t1 - t0,
        "dense_seconds": t2 - t1,
        "max_abs_diff": float(np.abs(gather.values - dense.values).max()),
    }
