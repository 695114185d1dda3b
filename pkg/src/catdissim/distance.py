"""Distances between rows from a block-diagonal ``Delta``.

``D = Z Delta Z'`` is evaluated in gather form: entry ``(u, v)`` is the sum over
variables of ``Delta_j[code_j(u), code_j(v)]``, so ``Z`` is never built.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .dataset import CategoricalDataset
from .delta import SYMMETRY_TOL, BlockDiagonalDelta, format_float
from .errors import DataError, SchemaMismatchError, UnseenCategoryError, UsageError

UNSEEN_POLICIES = ("error", "max")
DENSE_MAX_N = 2000
BINARY_MAGIC = b"CDMAT001"
_HEADER = struct.Struct("<8sQQI")
FLAG_SYMMETRIC = 1
FLAG_ZERO_DIAGONAL = 2


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    values: np.ndarray
    symmetric: bool = False
    zero_diagonal: bool = False
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DataError("distance matrix must be 2-d")
        if not np.isfinite(v).all() or (v < 0).any():
            raise DataError("distances must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def check_flags(self) -> bool:
        v = self.values
        ok = True
        if self.symmetric:
            ok &= v.shape[0] == v.shape[1] and bool(np.abs(v - v.T).max(initial=0) <= SYMMETRY_TOL)
        if self.zero_diagonal:
            ok &= bool(np.abs(np.diagonal(v)).max(initial=0) <= SYMMETRY_TOL)
        return ok

    def write_csv(self, path, row_ids=None, col_ids=None) -> None:
        n1, n2 = self.shape
        row_ids = row_ids if row_ids is not None else range(n1)
        col_ids = col_ids if col_ids is not None else range(n2)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id"] + [str(c) for c in col_ids])
            for rid, row in zip(row_ids, self.values):
                w.writerow([str(rid)] + [format_float(x) for x in row])

    def write_binary(self, path) -> None:
        """Header (magic, n1, n2, flags) then row-major little-endian float64."""
        flags = (FLAG_SYMMETRIC if self.symmetric else 0) | (FLAG_ZERO_DIAGONAL if self.zero_diagonal else 0)
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(BINARY_MAGIC, *self.shape, flags))
            fh.write(self.values.astype("<f8").tobytes(order="C"))

    @classmethod
    def read_binary(cls, path) -> "DistanceMatrix":
        with open(path, "rb") as fh:
            raw = fh.read()
        magic, n1, n2, flags = _HEADER.unpack_from(raw)
        if magic != BINARY_MAGIC:
            raise DataError(f"{path}: not a distance matrix file")
        body = raw[_HEADER.size:]
        if len(body) != 8 * n1 * n2:
            raise DataError(f"{path}: truncated distance matrix")
        values = np.frombuffer(body, dtype="<f8").reshape(n1, n2).astype(float)
        return cls(values, bool(flags & FLAG_SYMMETRIC), bool(flags & FLAG_ZERO_DIAGONAL))


def symmetrize(D: DistanceMatrix) -> DistanceMatrix:
    if D.shape[0] != D.shape[1]:
        raise DataError("only square distance matrices can be symmetrized")
    v = 0.5 * (D.values + D.values.T)
    zero = bool(np.abs(np.diagonal(v)).max(initial=0) <= SYMMETRY_TOL)
    return DistanceMatrix(v, True, zero, {**D.provenance, "symmetrized": True})


def _check_schema(ds: CategoricalDataset, delta: BlockDiagonalDelta) -> CategoricalDataset:
    ds = ds.without_response()
    if len(delta) != ds.n_vars:
        raise SchemaMismatchError(f"Delta has {len(delta)} blocks but the data has {ds.n_vars} variables")
    for j, (block, q) in enumerate(zip(delta.blocks, ds.q)):
        if block.order != q:
            raise SchemaMismatchError(
                f"variable {ds.variables[j].name!r}: Delta block of order {block.order}, data has {q} levels"
            )
    return ds


def _resolved_blocks(delta: BlockDiagonalDelta, datasets, unseen: str) -> list[np.ndarray]:
    """Blocks ready for lookup: undefined entries are max-filled, after checking
    that no row uses an undefined level when ``unseen == "error"``."""
    if unseen not in UNSEEN_POLICIES:
        raise UsageError(f"unseen policy must be one of {UNSEEN_POLICIES}")
    out = []
    for j, block in enumerate(delta.blocks):
        defined = block.defined
        if not defined.all() and unseen == "error":
            for ds in datasets:
                used = ds.observed(j) & ~defined
                if used.any():
                    lv = int(np.flatnonzero(used)[0])
                    var = ds.variables[j]
                    raise UnseenCategoryError(
                        f"variable {var.name!r}: level {var.levels[lv]!r} was not seen when "
                        f"Delta was built (unseen policy 'error')"
                    )
        out.append(block.max_fill())
    return out


def _gather(codes_a: np.ndarray, codes_b: np.ndarray, blocks, chunk: int = 256) -> np.ndarray:
    n_a, n_b = codes_a.shape[0], codes_b.shape[0]
    D = np.zeros((n_a, n_b))
    for start in range(0, n_a, chunk):
        stop = min(start + chunk, n_a)
        part = D[start:stop]
        for j, block in enumerate(blocks):
            part += block[codes_a[start:stop, j]][:, codes_b[:, j]]
    return D


def _provenance(delta: BlockDiagonalDelta, *datasets: CategoricalDataset) -> dict:
    return {
        "measure": delta.spec.measure if delta.spec else None,
        "spec": delta.spec.fingerprint if delta.spec else None,
        "delta": delta.fingerprint,
        "delta_source": delta.source,
        "datasets": [ds.fingerprint for ds in datasets],
    }


def pairwise_distances(ds: CategoricalDataset, delta: BlockDiagonalDelta, unseen: str = "error") -> DistanceMatrix:
    """``n x n`` distances between the rows of ``ds``."""
    ds = _check_schema(ds, delta)
    blocks = _resolved_blocks(delta, [ds], unseen)
    D = _gather(ds.codes, ds.codes, blocks)
    return DistanceMatrix(D, delta.symmetric, delta.zero_diagonal, _provenance(delta, ds))


def cross_distances(
    ds_a: CategoricalDataset,
    ds_b: CategoricalDataset,
    delta: BlockDiagonalDelta,
    unseen: str = "error",
) -> DistanceMatrix:
    """``n_a x n_b`` distances between the rows of two datasets sharing a schema."""
    ds_a = _check_schema(ds_a, delta)
    ds_b = _check_schema(ds_b, delta)
    if ds_a.variables != ds_b.variables:
        raise SchemaMismatchError("the two datasets do not share a schema")
    if ds_a.n_rows == 0 or ds_b.n_rows == 0:
        raise DataError("cross distances need non-empty datasets")
    blocks = _resolved_blocks(delta, [ds_a, ds_b], unseen)
    D = _gather(ds_a.codes, ds_b.codes, blocks)
    same = ds_a == ds_b
    return DistanceMatrix(
        D, same and delta.symmetric, same and delta.zero_diagonal, _provenance(delta, ds_a, ds_b)
    )


def naive_pairwise_dense(
    ds: CategoricalDataset,
    delta: BlockDiagonalDelta,
    unseen: str = "error",
    max_n: int = DENSE_MAX_N,
) -> DistanceMatrix:
    """Reference evaluation of ``Z Delta Z'`` with explicit matrix products."""
    ds = _check_schema(ds, delta)
    if ds.n_rows > max_n:
        raise DataError(f"dense evaluation refused for n={ds.n_rows} > {max_n}")
    from scipy.linalg import block_diag

    blocks = _resolved_blocks(delta, [ds], unseen)
    Z = ds.indicator()
    big = block_diag(*blocks) if blocks else np.zeros((0, 0))
    D = Z @ big @ Z.T
    return DistanceMatrix(D, delta.symmetric, delta.zero_diagonal, _provenance(delta, ds))


@dataclass(frozen=True)
class BlockReport:
    variable: int
    name: str
    zero_diagonal: bool
    symmetric: bool
    triangle_violations: int
    worst_violation: float

    @property
    def metric(self) -> bool:
        return self.zero_diagonal and self.symmetric and self.triangle_violations == 0


@dataclass(frozen=True)
class MetricReport:
    blocks: tuple[BlockReport, ...]

    @property
    def zero_diagonal(self) -> bool:
        return all(b.zero_diagonal for b in self.blocks)

    @property
    def symmetric(self) -> bool:
        return all(b.symmetric for b in self.blocks)

    @property
    def triangle(self) -> bool:
        return all(b.triangle_violations == 0 for b in self.blocks)

    @property
    def metric(self) -> bool:
        return all(b.metric for b in self.blocks)


def triangle_violations(block: np.ndarray, tol: float = SYMMETRY_TOL) -> tuple[int, float]:
    """Count triples with ``d[a, c] > d[a, b] + d[b, c]`` and the largest excess."""
    excess = block[:, None, :] - (block[:, :, None] + block[None, :, :])
    bad = excess > tol
    return int(bad.sum()), float(excess[bad].max()) if bad.any() else 0.0


def check_metric_properties(delta: BlockDiagonalDelta, tol: float = SYMMETRY_TOL) -> MetricReport:
    """Zero diagonal, symmetry and the triangle inequality for every block
    (over the levels the block defines)."""
    reports = []
    for b in delta.blocks:
        sub = b.observed_part()
        count, worst = triangle_violations(sub, tol)
        reports.append(BlockReport(
            b.variable,
            b.name,
            bool(np.all(np.abs(np.diagonal(sub)) <= tol)),
            bool(np.all(np.abs(sub - sub.T) <= tol)),
            count,
            worst,
        ))
    return MetricReport(tuple(reports))
