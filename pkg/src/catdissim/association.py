"""Association-based dissimilarities.

The dissimilarity between levels ``a`` and ``b`` of variable ``i`` is a weighted
sum, over the other variables ``j``, of a divergence between the conditional
distributions of ``j`` given ``a`` and given ``b``::

    delta_i(a, b) = sum_{j != i} w_ij * phi_ij(r_a^ij, r_b^ij)
"""
from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .cooccur import CooccurrenceModel, build_cooccurrence
from .dataset import CategoricalDataset
from .delta import BlockDiagonalDelta, DeltaBlock
from .errors import DataError, DomainError

PROB_TOL = 1e-9
ORACLE_MAX_Q = 20


def _check_pair(r_a, r_b) -> tuple[np.ndarray, np.ndarray]:
    r_a = np.asarray(r_a, dtype=float)
    r_b = np.asarray(r_b, dtype=float)
    if r_a.shape != r_b.shape or r_a.ndim != 1:
        raise DataError(f"profiles must be 1-d and of equal length, got {r_a.shape} and {r_b.shape}")
    for r in (r_a, r_b):
        if abs(r.sum() - 1.0) > PROB_TOL or (r < 0).any():
            raise DataError("profiles must be probability vectors")
    return r_a, r_b


# -- divergences ------------------------------------------------------------

class ProfileDivergence:
    """A divergence between two profiles. Subclasses implement :meth:`block`,
    which returns all pairwise values between the rows of a profile matrix."""

    name = "divergence"
    symmetric = True

    def __call__(self, r_a, r_b, p=None) -> float:
        r_a, r_b = _check_pair(r_a, r_b)
        return float(self.block(np.vstack([r_a, r_b]), p)[0, 1])

    def block(self, R: np.ndarray, p: np.ndarray | None) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


class TotalVariation(ProfileDivergence):
    name = "tvd"

    def block(self, R, p=None):
        return 0.5 * np.abs(R[:, None, :] - R[None, :, :]).sum(axis=-1)


class KullbackLeibler(ProfileDivergence):
    """Binary-log KL divergence between profiles.

    The default is the symmetrised sum ``sum r_a log(r_a/r_b) + r_b log(r_b/r_a)``;
    ``directed=True`` keeps only the first term. Entries below ``floor`` are
    raised to ``floor`` (no renormalisation).
    """

    name = "kl"

    def __init__(self, floor: float = 1e-10, directed: bool = False):
        self.floor = floor
        self.directed = directed
        self.symmetric = not directed

    def block(self, R, p=None):
        if self.floor > 0:
            R = np.maximum(R, self.floor)
        elif (R <= 0).any():
            raise DomainError("KL divergence is infinite for zero proportions; use kl_floor > 0")
        L = np.log2(R)
        if self.directed:
            return (R[:, None, :] * (L[:, None, :] - L[None, :, :])).sum(axis=-1)
        return ((R[:, None, :] - R[None, :, :]) * (L[:, None, :] - L[None, :, :])).sum(axis=-1)

    def __repr__(self):
        return f"KullbackLeibler(floor={self.floor!r}, directed={self.directed!r})"


class ChiSquare(ProfileDivergence):
    """``sum_l (r_al - r_bl)^2 / p_l`` with ``p`` the target variable's marginals."""

    name = "chisq"

    def block(self, R, p=None):
        if p is None:
            raise DataError("chi-square divergence needs the target marginals")
        p = np.asarray(p, dtype=float)
        if p.shape != R.shape[1:]:
            raise DataError("marginals and profiles differ in length")
        if (p <= 0).any():
            raise DomainError("chi-square divergence needs strictly positive marginals")
        diff = R[:, None, :] - R[None, :, :]
        return (diff**2 / p).sum(axis=-1)


class CustomDivergence(ProfileDivergence):
    """Wrap a scalar ``func(r_a, r_b, p)`` returning a finite non-negative value."""

    def __init__(self, func: Callable, name: str = "custom", symmetric: bool = True):
        self.func = func
        self.name = name
        self.symmetric = symmetric

    def block(self, R, p=None):
        q = R.shape[0]
        out = np.zeros((q, q))
        for a in range(q):
            for b in range(q):
                if a != b:
                    out[a, b] = self.func(R[a], R[b], p)
        if not np.isfinite(out).all() or (out < 0).any():
            raise DomainError(f"divergence {self.name!r} returned a negative or non-finite value")
        return out

    def __repr__(self):
        return f"CustomDivergence({self.name!r})"


DIVERGENCES: dict[str, Callable[..., ProfileDivergence]] = {
    "tvd": TotalVariation,
    "kl": KullbackLeibler,
    "chisq": ChiSquare,
}


def register_divergence(name: str, factory: Callable[..., ProfileDivergence]) -> None:
    DIVERGENCES[name] = factory


def get_divergence(phi, **params) -> ProfileDivergence:
    if isinstance(phi, ProfileDivergence):
        return phi
    if callable(phi):
        return CustomDivergence(phi)
    try:
        factory = DIVERGENCES[phi]
    except KeyError:
        raise DataError(f"unknown divergence {phi!r}; known: {', '.join(DIVERGENCES)}") from None
    return factory(**params) if factory is KullbackLeibler else factory()


def phi_tvd(r_a, r_b) -> float:
    """Total variation distance: half the L1 distance."""
    r_a, r_b = _check_pair(r_a, r_b)
    return 0.5 * float(np.abs(r_a - r_b).sum())


def phi_kl(r_a, r_b, kl_floor: float = 1e-10, directed: bool = False) -> float:
    return KullbackLeibler(kl_floor, directed)(r_a, r_b)


def phi_chisq(r_a, r_b, p) -> float:
    return ChiSquare()(r_a, r_b, p)


def ahmad_dey_oracle(r_a, r_b, chunk: int = 1 << 16) -> float:
    """Brute-force partition form of the profile distance.

    Maximises ``P(w|a) + P(not w|b) - 1`` over every binary partition ``w`` of
    the target categories except the empty and the full set (``2^q - 2`` of
    them). Exponential in ``q``; refused above ``q = 20``.
    """
    r_a, r_b = _check_pair(r_a, r_b)
    q = r_a.size
    if q > ORACLE_MAX_Q:
        raise DomainError(f"partition enumeration refused for q={q} > {ORACLE_MAX_Q}")
    if q < 2:
        raise DataError("partitions need at least two categories")
    bits = np.arange(q)
    best = -np.inf
    total = (1 << q) - 1
    for start in range(1, total, chunk):
        masks = np.arange(start, min(start + chunk, total))
        inside = ((masks[:, None] >> bits) & 1).astype(bool)
        p_in_a = np.where(inside, r_a, 0.0).sum(axis=1)
        p_out_b = np.where(inside, 0.0, r_b).sum(axis=1)
        best = max(best, float((p_in_a + p_out_b - 1.0).max()))
    return best


# -- weights ----------------------------------------------------------------

def weight_preset(name: str, n_vars: int, response: int | None = None) -> np.ndarray:
    """Weight matrices with zero diagonal.

    ``ones`` sums over all other variables, ``mean`` averages (``1/(Q-1)``),
    ``supervised`` uses only the pairs with the response variable and ``full``
    is ``ones`` including the response.
    """
    if name in ("ones", "full"):
        w = np.ones((n_vars, n_vars))
    elif name == "mean":
        w = np.full((n_vars, n_vars), 1.0 / max(n_vars - 1, 1))
    elif name == "supervised":
        if response is None:
            raise DataError("supervised weights need a response variable")
        w = np.zeros((n_vars, n_vars))
        w[:, response] = 1.0
    else:
        raise DataError(f"unknown weight preset {name!r}")
    np.fill_diagonal(w, 0.0)
    return w


def check_weights(w, n_vars: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (n_vars, n_vars):
        raise DataError(f"weight matrix shape {w.shape} does not match {n_vars} variables")
    if not np.isfinite(w).all() or (w < 0).any():
        raise DataError("weights must be finite and non-negative")
    if np.any(np.diagonal(w) != 0):
        raise DataError("weights must have a zero diagonal")
    return w


# -- builders ---------------------------------------------------------------

def build_delta_association(
    model: CooccurrenceModel,
    phi="tvd",
    weights="ones",
    **phi_params,
) -> BlockDiagonalDelta:
    """Association-based dissimilarity blocks for every variable of ``model``.

    Parameters
    ----------
    model : CooccurrenceModel
    phi : str, ProfileDivergence, or mapping
        One divergence for all pairs, or a mapping ``(i, j) -> divergence``
        (pairs missing from the mapping must have zero weight).
    weights : str or array
        A preset name for :func:`weight_preset` or a ``Q x Q`` matrix.
    **phi_params
        Passed to the divergence factory (``floor``, ``directed`` for KL).

    Levels of variable ``i`` with zero count get undefined (NaN) rows; levels of
    ``j`` with zero count are left out of the profiles, where both rows are 0.
    """
    Q = model.n_vars
    if Q < 2:
        raise DomainError("association-based dissimilarities need at least two variables")
    w = weight_preset(weights, Q) if isinstance(weights, str) else check_weights(weights, Q)
    if isinstance(phi, Mapping):
        phis = {k: get_divergence(v, **phi_params) for k, v in phi.items()}
    else:
        single = get_divergence(phi, **phi_params)
        phis = None

    blocks = []
    for i, var in enumerate(model.variables):
        rows = model.marginals.counts[i] > 0
        acc = np.zeros((int(rows.sum()),) * 2)
        for j in range(Q):
            if j == i or w[i, j] == 0:
                continue
            div = single if phis is None else phis.get((i, j))
            if div is None:
                raise DataError(f"no divergence given for variable pair ({i}, {j})")
            cols = model.marginals.counts[j] > 0
            R = model.profile(i, j).matrix[np.ix_(rows, cols)]
            acc += w[i, j] * div.block(R, model.marginals.p(j)[cols])
        vals = np.full((rows.size, rows.size), np.nan)
        vals[np.ix_(rows, rows)] = acc
        blocks.append(DeltaBlock(i, var.name, vals, var.levels))
    return BlockDiagonalDelta(tuple(blocks))


def build_delta_supervised(
    ds_with_response: CategoricalDataset,
    phi="tvd",
    mode: str = "supervised",
    **phi_params,
) -> BlockDiagonalDelta:
    """Dissimilarities that account for the association with the response.

    The co-occurrence model covers the predictors and the response. ``mode``
    ``"supervised"`` weights only the pairs with the response; ``"full"``
    weights every pair by one. The response's own block is dropped, so the
    result has one block per predictor.
    """
    r = ds_with_response.response_index
    if r is None:
        raise DataError("dataset has no response variable; use append_response")
    if mode not in ("supervised", "full"):
        raise DataError(f"supervised mode must be 'supervised' or 'full', got {mode!r}")
    if int(ds_with_response.observed(r).sum()) < 2:
        raise DataError("response needs at least 2 observed classes")
    model = build_cooccurrence(ds_with_response)
    w = weight_preset(mode, model.n_vars, response=r)
    full = build_delta_association(model, phi, w, **phi_params)
    kept = []
    for b in full.blocks:
        if b.variable == r:
            continue
        kept.append(DeltaBlock(len(kept), b.name, b.values, b.levels))
    return BlockDiagonalDelta(tuple(kept), source=ds_with_response.without_response().fingerprint)


def read_weights_csv(path_or_text, names) -> np.ndarray:
    """Weights from a CSV whose header lists the variable names (an optional
    leading column of row names is allowed). Rows/columns are reordered to
    ``names``."""
    import csv
    import io

    if isinstance(path_or_text, str) and "\n" in path_or_text:
        rows = list(csv.reader(io.StringIO(path_or_text)))
    else:
        with open(path_or_text, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise DataError("empty weights file")
    header = rows[0]
    body = rows[1:]
    if len(header) == len(names) + 1:
        header = header[1:]
        body = [r[1:] for r in body]
    if sorted(header) != sorted(names) or len(body) != len(header):
        raise DataError(f"weights header {header} does not match variables {list(names)}")
    try:
        w = np.array([[float(x) for x in r] for r in body])
    except ValueError as exc:
        raise DataError(f"non-numeric weight: {exc}") from None
    if w.shape != (len(header), len(header)):
        raise DataError("weights must form a square matrix")
    order = [header.index(nm) for nm in names]
    return check_weights(w[np.ix_(order, order)], len(names))
