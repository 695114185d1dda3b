"""Categorical tables: ingestion, level encoding, row subsets and fold plans.

A dataset stores one integer code per row and variable; code ``c`` of variable
``j`` means the row takes the ``c``-th level of that variable. This is the
compact form of the super-indicator matrix ``Z = (Z_1 ... Z_Q)``.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import DataError, UsageError


@dataclass(frozen=True)
class VariableSchema:
    name: str
    levels: tuple[str, ...]
    ordered_scores: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(str(lv) for lv in self.levels))
        if len(set(self.levels)) != len(self.levels):
            raise DataError(f"variable {self.name!r}: duplicate level labels")
        if self.ordered_scores is not None:
            scores = tuple(float(s) for s in self.ordered_scores)
            if len(scores) != len(self.levels):
                raise DataError(
                    f"variable {self.name!r}: {len(scores)} ordered scores for "
                    f"{len(self.levels)} levels"
                )
            object.__setattr__(self, "ordered_scores", scores)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def with_levels(self, levels: Sequence[str]) -> "VariableSchema":
        """Schema extended by extra levels appended after the existing ones."""
        extra = [lv for lv in levels if lv not in self.levels]
        if not extra:
            return self
        if self.ordered_scores is not None:
            raise DataError(
                f"variable {self.name!r}: cannot add levels {extra} to an ordered variable"
            )
        return VariableSchema(self.name, self.levels + tuple(extra))

    def to_dict(self) -> dict:
        out = {"name": self.name, "levels": list(self.levels)}
        if self.ordered_scores is not None:
            out["ordered_scores"] = list(self.ordered_scores)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "VariableSchema":
        return cls(d["name"], tuple(d["levels"]), d.get("ordered_scores"))


def encode_labels(values: Iterable) -> tuple[np.ndarray, tuple[str, ...]]:
    """Integer codes in first-appearance order, plus the level labels."""
    index: dict[str, int] = {}
    codes = []
    for v in values:
        key = str(v)
        if key not in index:
            index[key] = len(index)
        codes.append(index[key])
    return np.asarray(codes, dtype=np.intp), tuple(index)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CategoricalDataset:
    """``n_rows`` observations on ``Q`` categorical variables.

    ``codes`` has shape ``(n_rows, Q)``. A dataset produced by :func:`subset`
    keeps its parent's levels even when some no longer occur; those are listed
    by :meth:`unobserved_levels`.
    """

    variables: tuple[VariableSchema, ...]
    codes: np.ndarray
    response_index: int | None = None
    _observed: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        codes = np.asarray(self.codes, dtype=np.intp)
        if codes.ndim == 1 and len(self.variables) == 1:
            codes = codes[:, None]
        if codes.ndim != 2 or codes.shape[1] != len(self.variables):
            raise DataError(
                f"codes shape {codes.shape} does not match {len(self.variables)} variables"
            )
        observed = []
        for j, var in enumerate(self.variables):
            col = codes[:, j]
            if col.size and (col.min() < 0 or col.max() >= var.n_levels):
                raise DataError(f"variable {var.name!r}: code out of range 0..{var.n_levels - 1}")
            observed.append(_readonly(np.bincount(col, minlength=var.n_levels) > 0))
        if self.response_index is not None and not 0 <= self.response_index < len(self.variables):
            raise DataError(f"response index {self.response_index} out of range")
        object.__setattr__(self, "codes", _readonly(codes))
        object.__setattr__(self, "_observed", tuple(observed))

    def __eq__(self, other):
        if not isinstance(other, CategoricalDataset):
            return NotImplemented
        return (
            self.variables == other.variables
            and self.response_index == other.response_index
            and np.array_equal(self.codes, other.codes)
        )

    __hash__ = None

    @property
    def n_rows(self) -> int:
        return self.codes.shape[0]

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def q(self) -> tuple[int, ...]:
        return tuple(v.n_levels for v in self.variables)

    @property
    def n_categories(self) -> int:
        return sum(self.q)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def observed(self, j: int) -> np.ndarray:
        """Boolean mask of the levels of variable ``j`` that occur in this dataset."""
        return self._observed[j]

    def unobserved_levels(self) -> dict[int, list[int]]:
        out = {}
        for j, mask in enumerate(self._observed):
            missing = np.flatnonzero(~mask)
            if missing.size:
                out[j] = missing.tolist()
        return out

    @property
    def is_complete(self) -> bool:
        return all(mask.all() for mask in self._observed)

    def indicator(self, j: int | None = None) -> np.ndarray:
        """Dense 0/1 indicator matrix ``Z_j``, or ``Z`` when ``j`` is None."""
        if j is not None:
            z = np.zeros((self.n_rows, self.q[j]))
            z[np.arange(self.n_rows), self.codes[:, j]] = 1.0
            return z
        if self.n_vars == 0:
            return np.zeros((self.n_rows, 0))
        return np.hstack([self.indicator(k) for k in range(self.n_vars)])

    def decode(self) -> list[list[str]]:
        return [
            [self.variables[j].levels[c] for j, c in enumerate(row)]
            for row in self.codes.tolist()
        ]

    def column_labels(self, j: int) -> list[str]:
        levels = self.variables[j].levels
        return [levels[c] for c in self.codes[:, j].tolist()]

    def without_response(self) -> "CategoricalDataset":
        if self.response_index is None:
            return self
        keep = [j for j in range(self.n_vars) if j != self.response_index]
        return CategoricalDataset(
            tuple(self.variables[j] for j in keep), self.codes[:, keep]
        )

    def response_codes(self) -> np.ndarray:
        if self.response_index is None:
            raise DataError("dataset has no response variable")
        return self.codes[:, self.response_index]

    def with_schema(self, variables: Sequence[VariableSchema]) -> "CategoricalDataset":
        """Re-base onto an extended schema (same names, levels only appended)."""
        variables = tuple(variables)
        if len(variables) != self.n_vars:
            raise DataError("schema has a different number of variables")
        for old, new in zip(self.variables, variables):
            if old.name != new.name or new.levels[: old.n_levels] != old.levels:
                raise DataError(f"variable {old.name!r}: schema is not an extension")
        return CategoricalDataset(variables, self.codes, self.response_index)

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(self.manifest(), sort_keys=True).encode())
        h.update(self.codes.astype("<i8").tobytes())
        return h.hexdigest()[:16]

    def manifest(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "variables": [v.to_dict() for v in self.variables],
            "response_index": self.response_index,
        }


def parse_csv(
    text: str | TextIO,
    has_header: bool = True,
    delimiter: str = ",",
    na_policy: str = "error",
    na_values: Sequence[str] = ("",),
    schema: Sequence[VariableSchema] | None = None,
) -> CategoricalDataset:
    """Parse a delimited table in which every column is categorical.

    Levels are numbered in order of first appearance. When ``schema`` is given,
    its levels keep their codes and any new label is appended to the level list
    of that variable (it is then unobserved in whatever the schema came from).
    """
    if na_policy not in ("error", "drop_row"):
        raise UsageError(f"unknown na_policy {na_policy!r}")
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream, delimiter=delimiter)
    rows = [r for r in reader if r]
    if has_header:
        if not rows:
            raise DataError("empty table")
        header, rows = rows[0], rows[1:]
    else:
        header = None
    if not rows:
        raise DataError("empty table")
    width = len(header) if header is not None else len(rows[0])
    first_line = 2 if has_header else 1
    if header is None:
        header = [f"V{j + 1}" for j in range(width)]
    if len(set(header)) != len(header):
        raise DataError("duplicate column names in header")

    na = set(na_values)
    kept = []
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"row {first_line + i}: expected {width} fields, got {len(row)}")
        missing = [j for j, cell in enumerate(row) if cell in na]
        if missing:
            if na_policy == "error":
                raise DataError(
                    f"row {first_line + i}, column {header[missing[0]]!r}: missing value"
                )
            continue
        kept.append(row)
    if not kept:
        raise DataError("empty table after dropping rows with missing values")

    if schema is not None:
        schema = tuple(schema)
        if tuple(v.name for v in schema) != tuple(header):
            raise DataError(f"columns {header} do not match schema {[v.name for v in schema]}")

    variables, columns = [], []
    for j in range(width):
        values = [row[j] for row in kept]
        if schema is None:
            codes, levels = encode_labels(values)
            variables.append(VariableSchema(header[j], levels))
        else:
            var = schema[j].with_levels(list(dict.fromkeys(values)))
            index = {lv: c for c, lv in enumerate(var.levels)}
            codes = np.fromiter((index[v] for v in values), dtype=np.intp, count=len(values))
            variables.append(var)
        columns.append(codes)
    return CategoricalDataset(tuple(variables), np.column_stack(columns))


def read_csv(path, **options) -> CategoricalDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_csv(fh, **options)


def subset(ds: CategoricalDataset, rows: Sequence[int], empty_ok: bool = False) -> CategoricalDataset:
    """Rows ``rows`` of ``ds`` (duplicates allowed). The parent schema is kept."""
    idx = np.asarray(rows, dtype=np.intp).reshape(-1)
    if idx.size == 0 and not empty_ok:
        raise DataError("empty row subset")
    if idx.size and (idx.min() < 0 or idx.max() >= ds.n_rows):
        raise DataError(f"row index out of range 0..{ds.n_rows - 1}")
    return CategoricalDataset(ds.variables, ds.codes[idx], ds.response_index)


def append_response(
    ds: CategoricalDataset, labels: Sequence, name: str = "response"
) -> CategoricalDataset:
    """Add the class labels as a last variable and mark it as the response."""
    if ds.response_index is not None:
        raise DataError("dataset already has a response variable")
    if len(labels) != ds.n_rows:
        raise DataError(f"{len(labels)} labels for {ds.n_rows} rows")
    if hasattr(labels, "codes") and hasattr(labels, "classes"):
        codes, levels = np.asarray(labels.codes, dtype=np.intp), tuple(labels.classes)
    else:
        codes, levels = encode_labels(labels)
    if len(np.unique(codes)) < 2:
        raise DataError("response needs at least 2 distinct classes")
    if name in ds.names:
        raise DataError(f"response name {name!r} clashes with a predictor")
    return CategoricalDataset(
        ds.variables + (VariableSchema(name, levels),),
        np.column_stack([ds.codes, codes]),
        response_index=ds.n_vars,
    )


def split_response(ds: CategoricalDataset, column: str) -> tuple[CategoricalDataset, list[str]]:
    """Separate a named column out of ``ds``: returns (predictors, label column)."""
    if column not in ds.names:
        raise DataError(f"no column named {column!r}")
    j = ds.names.index(column)
    labels = ds.column_labels(j)
    keep = [k for k in range(ds.n_vars) if k != j]
    return CategoricalDataset(tuple(ds.variables[k] for k in keep), ds.codes[:, keep]), labels


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Fold index per row for each of ``n_repeats`` repetitions, shape ``(R, n)``."""

    assignments: np.ndarray
    n_folds: int
    n_repeats: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "assignments", _readonly(np.asarray(self.assignments, dtype=np.intp)))

    @property
    def n_rows(self) -> int:
        return self.assignments.shape[1]

    def split(self, repeat: int, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """(train rows, test rows) for one cell, both in increasing order."""
        a = self.assignments[repeat]
        return np.flatnonzero(a != fold), np.flatnonzero(a == fold)

    def __iter__(self):
        for r in range(self.n_repeats):
            for f in range(self.n_folds):
                yield r, f, *self.split(r, f)


def split_folds(
    ds: CategoricalDataset | int,
    labels: Sequence | None = None,
    n_folds: int = 5,
    n_repeats: int = 10,
    seed: int = 0,
) -> FoldPlan:
    """Repeated (stratified when ``labels`` is given) k-fold assignment.

    Within each class the rows are shuffled and dealt to folds round-robin; the
    dealing position carries over from one class to the next, so overall fold
    sizes also differ by at most one.
    """
    n = ds if isinstance(ds, int) else ds.n_rows
    if n_folds < 2:
        raise UsageError("n_folds must be at least 2")
    if n_repeats < 1:
        raise UsageError("n_repeats must be at least 1")
    if n_folds > n:
        raise DataError(f"n_folds={n_folds} exceeds the {n} rows")
    if labels is None:
        strata = [np.arange(n)]
    else:
        codes = labels.codes if hasattr(labels, "codes") else encode_labels(labels)[0]
        codes = np.asarray(codes)
        if len(codes) != n:
            raise DataError(f"{len(codes)} labels for {n} rows")
        strata = [np.flatnonzero(codes == c) for c in range(codes.max() + 1)]
        strata = [s for s in strata if s.size]

    assignments = np.empty((n_repeats, n), dtype=np.intp)
    for r in range(n_repeats):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        offset = 0
        for members in strata:
            perm = rng.permutation(members)
            assignments[r, perm] = (offset + np.arange(perm.size)) % n_folds
            offset = (offset + perm.size) % n_folds
    return FoldPlan(assignments, n_folds, n_repeats, seed)
