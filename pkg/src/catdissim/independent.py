"""Dissimilarity blocks that ignore the other variables.

Measures estimated from frequencies take a :class:`MarginalTable`; levels with
zero count in it get NaN rows and columns (see :class:`DeltaBlock`). Natural
logarithms are used throughout; IOF and OF depend on that choice.
"""
from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np

from .cooccur import MarginalTable
from .dataset import VariableSchema
from .delta import BlockDiagonalDelta, DeltaBlock
from .errors import DataError, DomainError


class OrderedScoresWarning(UserWarning):
    pass


def _block(j: int, var: VariableSchema, values: np.ndarray) -> DeltaBlock:
    return DeltaBlock(j, var.name, values, var.levels)


def _embed(observed: np.ndarray, sub: np.ndarray) -> np.ndarray:
    """Place a dissimilarity matrix over observed levels into a NaN-padded block."""
    if observed.all():
        return sub
    out = np.full((observed.size, observed.size), np.nan)
    out[np.ix_(observed, observed)] = sub
    return out


def _off_diagonal(q: int) -> np.ndarray:
    return np.ones((q, q)) - np.eye(q)


def build_matching(schema: Sequence[VariableSchema]) -> BlockDiagonalDelta:
    """Simple matching: 1 between different levels, 0 on the diagonal."""
    return BlockDiagonalDelta(tuple(
        _block(j, v, _off_diagonal(v.n_levels)) for j, v in enumerate(schema)
    ))


def build_eskin(schema: Sequence[VariableSchema]) -> BlockDiagonalDelta:
    return BlockDiagonalDelta(tuple(
        _block(j, v, (2.0 / v.n_levels**2) * _off_diagonal(v.n_levels))
        for j, v in enumerate(schema)
    ))


def lin_dissimilarity(p_a: float, p_b: float) -> float:
    """Lin's dissimilarity between two different levels with proportions ``p_a``, ``p_b``."""
    s = np.log(p_a + p_b)
    return (np.log(p_a) + np.log(p_b) - 2 * s) / (2 * s)


def build_lin(marginals: MarginalTable, lin_guard: float | str = 0.0) -> BlockDiagonalDelta:
    """Lin's information-theoretic dissimilarity.

    Parameters
    ----------
    marginals : MarginalTable
        Category frequencies.
    lin_guard : float or "auto"
        When two levels together cover every row, the denominator
        ``log(p_a + p_b)`` is zero. With ``lin_guard=0`` this raises
        :class:`DomainError`; a positive value clamps ``p_a + p_b`` to
        ``1 - lin_guard`` before taking logarithms. ``"auto"`` uses ``1/(2n)``.
    """
    eps = 1.0 / (2 * marginals.n) if lin_guard == "auto" else float(lin_guard)
    blocks = []
    for j, var in enumerate(marginals.variables):
        counts = marginals.counts[j]
        obs = counts > 0
        c = counts[obs]
        p = c / marginals.n
        pair_total = c[:, None] + c[None, :]
        singular = (pair_total == marginals.n) & ~np.eye(c.size, dtype=bool)
        if singular.any() and eps == 0:
            a, b = np.argwhere(singular)[0]
            levels = [lv for lv, o in zip(var.levels, obs) if o]
            raise DomainError(
                f"Lin is undefined for variable {var.name!r}: levels {levels[a]!r} and "
                f"{levels[b]!r} cover all rows (log(p_a + p_b) = 0); set lin_guard"
            )
        s = np.minimum(p[:, None] + p[None, :], 1.0 - eps) if eps > 0 else p[:, None] + p[None, :]
        log_s = np.log(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = (np.log(p)[:, None] + np.log(p)[None, :] - 2 * log_s) / (2 * log_s)
        np.fill_diagonal(vals, 0.0)
        blocks.append(_block(j, var, _embed(obs, vals)))
    return BlockDiagonalDelta(tuple(blocks))


def _outer_off_diagonal(x: np.ndarray) -> np.ndarray:
    out = np.outer(x, x)
    np.fill_diagonal(out, 0.0)
    return out


def build_iof(marginals: MarginalTable) -> BlockDiagonalDelta:
    """Inverse occurrence frequency: ``log(n p_a) log(n p_b)`` off the diagonal."""
    blocks = []
    for j, var in enumerate(marginals.variables):
        c = marginals.counts[j]
        obs = c > 0
        blocks.append(_block(j, var, _embed(obs, _outer_off_diagonal(np.log(c[obs])))))
    return BlockDiagonalDelta(tuple(blocks))


def build_of(marginals: MarginalTable) -> BlockDiagonalDelta:
    """Occurrence frequency: ``log(1/p_a) log(1/p_b)`` off the diagonal."""
    blocks = []
    for j, var in enumerate(marginals.variables):
        c = marginals.counts[j]
        obs = c > 0
        blocks.append(_block(j, var, _embed(obs, _outer_off_diagonal(np.log(marginals.n / c[obs])))))
    return BlockDiagonalDelta(tuple(blocks))


def goodall_diagonal(p: np.ndarray, variant: int, counts: np.ndarray | None = None) -> np.ndarray:
    """Self-dissimilarities of the four Goodall variants.

    Variants 1 and 2 sum the squared proportions that are smaller-or-equal
    (resp. larger-or-equal) to that of the level itself, the level included.
    Ties are decided on ``counts`` when given, so they are exact.
    """
    key = p if counts is None else counts
    sq = p**2
    if variant == 1:
        return np.array([sq[key <= k].sum() for k in key])
    if variant == 2:
        return np.array([sq[key >= k].sum() for k in key])
    if variant == 3:
        return sq
    if variant == 4:
        return 1.0 - sq
    raise DataError(f"Goodall variant must be 1..4, got {variant}")


def build_goodall(marginals: MarginalTable, variant: int) -> BlockDiagonalDelta:
    blocks = []
    for j, var in enumerate(marginals.variables):
        c = marginals.counts[j]
        obs = c > 0
        vals = _off_diagonal(int(obs.sum()))
        np.fill_diagonal(vals, goodall_diagonal(c[obs] / marginals.n, variant, c[obs]))
        blocks.append(_block(j, var, _embed(obs, vals)))
    return BlockDiagonalDelta(tuple(blocks))


def variability_diagonal(p: np.ndarray, variant: str) -> float:
    """1 - normalised entropy (VE) or 1 - normalised Gini mutability (VM).

    Both are non-negative in exact arithmetic; rounding below zero for uniform
    distributions is clipped.
    """
    q = p.size
    if variant == "VE":
        nz = p[p > 0]
        return max(0.0, 1.0 + float(np.sum(nz * np.log(nz))) / np.log(q))
    if variant == "VM":
        return max(0.0, 1.0 - (q / (q - 1)) * (1.0 - float(np.sum(p**2))))
    raise DataError(f"variability variant must be 'VE' or 'VM', got {variant!r}")


def build_variability(marginals: MarginalTable, variant: str) -> BlockDiagonalDelta:
    """Variable entropy (``"VE"``) or variable mutability (``"VM"``).

    The number of categories is the number of observed levels; a variable with
    a single observed level has no variability to normalise and raises.
    """
    variant = variant.upper()
    blocks = []
    for j, var in enumerate(marginals.variables):
        c = marginals.counts[j]
        obs = c > 0
        q = int(obs.sum())
        if q < 2:
            raise DomainError(f"{variant} is undefined for constant variable {var.name!r}")
        vals = _off_diagonal(q)
        np.fill_diagonal(vals, variability_diagonal(c[obs] / marginals.n, variant))
        blocks.append(_block(j, var, _embed(obs, vals)))
    return BlockDiagonalDelta(tuple(blocks))


def ordered_violations(block: np.ndarray) -> list[tuple[int, int, int]]:
    """Triples ``(a, b, b*)`` breaking ``delta[a, b] <= delta[a, b*]`` for
    ``b*`` further from ``a`` than ``b`` on the same side."""
    q = block.shape[0]
    bad = []
    for a in range(q):
        for b in range(q):
            for bs in range(q):
                further = (a <= b < bs) or (bs < b <= a)
                if further and block[a, b] > block[a, bs]:
                    bad.append((a, b, bs))
    return bad


def build_ordered(
    schema: Sequence[VariableSchema],
    scores: Sequence[Sequence[float] | None] | None = None,
) -> BlockDiagonalDelta:
    """``|score_b - score_a|`` per variable.

    Scores come from ``scores[j]`` if given, else from the variable's
    ``ordered_scores``, else the level index. Orderings in which the
    dissimilarity does not grow away from each level trigger an
    :class:`OrderedScoresWarning`; they are not repaired.
    """
    schema = tuple(schema)
    if scores is not None and len(scores) != len(schema):
        raise DataError(f"{len(scores)} score vectors for {len(schema)} variables")
    blocks = []
    for j, var in enumerate(schema):
        s = scores[j] if scores is not None and scores[j] is not None else var.ordered_scores
        s = np.arange(var.n_levels, dtype=float) if s is None else np.asarray(s, dtype=float)
        if s.size != var.n_levels:
            raise DataError(f"variable {var.name!r}: {s.size} scores for {var.n_levels} levels")
        vals = np.abs(s[None, :] - s[:, None])
        if ordered_violations(vals):
            warnings.warn(
                f"variable {var.name!r}: scores {s.tolist()} are not monotone in level order",
                OrderedScoresWarning,
                stacklevel=2,
            )
        blocks.append(_block(j, var, vals))
    return BlockDiagonalDelta(tuple(blocks))
