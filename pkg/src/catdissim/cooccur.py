"""Co-occurrence statistics: marginal proportions, joint blocks of
``P = Z'Z / n`` and the profile blocks of ``R = P_d^{-1} (P - P_d)``."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .dataset import CategoricalDataset, VariableSchema
from .errors import DataError


@dataclass(frozen=True, eq=False)
class MarginalTable:
    """Per-variable category counts and relative frequencies."""

    variables: tuple[VariableSchema, ...]
    counts: tuple[np.ndarray, ...]
    n: int

    @property
    def proportions(self) -> tuple[np.ndarray, ...]:
        return tuple(c / self.n for c in self.counts)

    def p(self, j: int) -> np.ndarray:
        return self.counts[j] / self.n

    def inverse(self, j: int) -> np.ndarray:
        """Reciprocal proportions; ``inf`` for unobserved levels."""
        with np.errstate(divide="ignore"):
            return self.n / self.counts[j]

    def observed(self, j: int) -> np.ndarray:
        return self.counts[j] > 0

    @property
    def n_vars(self) -> int:
        return len(self.counts)

    def diagonal(self) -> np.ndarray:
        """The diagonal of ``P_d`` (all variables concatenated)."""
        return np.concatenate(self.proportions)


@dataclass(frozen=True, eq=False)
class ProfileBlock:
    """Rows are the conditional distributions of ``target`` given each level of
    ``source``. Rows for levels of ``source`` with zero count are NaN."""

    source: int
    target: int
    matrix: np.ndarray

    @property
    def defined_rows(self) -> np.ndarray:
        return ~np.isnan(self.matrix[:, 0]) if self.matrix.shape[1] else np.ones(self.matrix.shape[0], bool)


class CooccurrenceModel:
    """Marginals, joint count blocks (upper triangle only) and profile blocks
    for every ordered pair of variables."""

    def __init__(self, marginals: MarginalTable, joint_counts: dict[tuple[int, int], np.ndarray]):
        self.marginals = marginals
        self._joint = joint_counts
        self._profiles: dict[tuple[int, int], ProfileBlock] = {}
        for (i, j), c in joint_counts.items():
            self._profiles[i, j] = ProfileBlock(i, j, _conditional(c, marginals.counts[i]))
            self._profiles[j, i] = ProfileBlock(j, i, _conditional(c.T, marginals.counts[j]))
        for blk in self._profiles.values():
            blk.matrix.setflags(write=False)

    @property
    def n(self) -> int:
        return self.marginals.n

    @property
    def n_vars(self) -> int:
        return self.marginals.n_vars

    @property
    def variables(self) -> tuple[VariableSchema, ...]:
        return self.marginals.variables

    def unobserved(self) -> dict[int, list[int]]:
        out = {}
        for j, c in enumerate(self.marginals.counts):
            zero = np.flatnonzero(c == 0)
            if zero.size:
                out[j] = zero.tolist()
        return out

    def joint_counts(self, i: int, j: int) -> np.ndarray:
        if i == j:
            return np.diag(self.marginals.counts[i])
        return self._joint[i, j] if i < j else self._joint[j, i].T

    def joint(self, i: int, j: int) -> np.ndarray:
        """Block ``(i, j)`` of ``P``: joint relative frequencies, ``q_i x q_j``."""
        return self.joint_counts(i, j) / self.n

    def profile(self, i: int, j: int) -> ProfileBlock:
        if i == j:
            raise DataError("profiles are only defined for two different variables")
        try:
            return self._profiles[i, j]
        except KeyError:
            raise DataError(f"no variable pair ({i}, {j})") from None

    def full_p(self) -> np.ndarray:
        """Dense ``P`` (``Q* x Q*``); meant for inspection and tests."""
        return np.block([[self.joint(i, j) for j in range(self.n_vars)] for i in range(self.n_vars)])

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "variables": [v.to_dict() for v in self.variables],
            "marginal_counts": [c.tolist() for c in self.marginals.counts],
            "joint_counts": {f"{i},{j}": c.tolist() for (i, j), c in sorted(self._joint.items())},
        }


def _conditional(counts: np.ndarray, row_totals: np.ndarray) -> np.ndarray:
    out = np.full(counts.shape, np.nan)
    ok = row_totals > 0
    out[ok] = counts[ok] / row_totals[ok, None]
    return out


def build_cooccurrence(ds: CategoricalDataset, strict: bool = False) -> CooccurrenceModel:
    """Count co-occurrences for all variable pairs of ``ds`` (response included)."""
    if ds.n_rows < 1:
        raise DataError("co-occurrence model needs at least one row")
    q = ds.q
    counts = []
    for j in range(ds.n_vars):
        c = np.bincount(ds.codes[:, j], minlength=q[j]).astype(np.int64)
        if strict and (c == 0).any():
            lv = int(np.flatnonzero(c == 0)[0])
            var = ds.variables[j]
            raise DataError(f"variable {var.name!r}: level {var.levels[lv]!r} is not observed")
        c.setflags(write=False)
        counts.append(c)
    joint = {}
    for i, j in combinations(range(ds.n_vars), 2):
        flat = ds.codes[:, i] * q[j] + ds.codes[:, j]
        c = np.bincount(flat, minlength=q[i] * q[j]).astype(np.int64).reshape(q[i], q[j])
        c.setflags(write=False)
        joint[i, j] = c
    return CooccurrenceModel(MarginalTable(ds.variables, tuple(counts), ds.n_rows), joint)


def profile(model: CooccurrenceModel, i: int, j: int) -> ProfileBlock:
    return model.profile(i, j)


def marginals(model: CooccurrenceModel, i: int) -> np.ndarray:
    return model.marginals.p(i)
