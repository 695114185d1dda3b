"""Distance-based learners and their repeated cross-validation."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np

from .dataset import CategoricalDataset, FoldPlan, encode_labels, subset
from .delta import BlockDiagonalDelta, MeasureSpec, format_float
from .distance import DistanceMatrix, cross_distances, pairwise_distances, symmetrize
from .errors import CatDissimError, DataError

DEFAULT_K_GRID = (1, 3, 5, 9, 15, 21)


@dataclass(frozen=True, eq=False)
class Labeling:
    codes: np.ndarray
    classes: tuple[str, ...]

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.intp)
        if codes.size and (codes.min() < 0 or codes.max() >= len(self.classes)):
            raise DataError("class code out of range")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "classes", tuple(self.classes))

    @classmethod
    def from_values(cls, values: Sequence) -> "Labeling":
        codes, classes = encode_labels(values)
        return cls(codes, classes)

    def __len__(self):
        return self.codes.size

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def labels(self) -> list[str]:
        return [self.classes[c] for c in self.codes.tolist()]

    def take(self, rows) -> "Labeling":
        return Labeling(self.codes[np.asarray(rows, dtype=np.intp)], self.classes)


def _as_labeling(labels) -> Labeling:
    return labels if isinstance(labels, Labeling) else Labeling.from_values(labels)


# -- k nearest neighbours ---------------------------------------------------

def _knn_votes(D: np.ndarray, train_codes: np.ndarray, n_classes: int, ks: Sequence[int]) -> dict[int, np.ndarray]:
    """Predictions for every ``k`` in ``ks`` from a train x test distance matrix.

    Neighbours are the ``k`` smallest entries of each column; equal distances
    are ordered by training row. Vote ties go to the class with the smaller
    summed neighbour distance, then to the lower class code.
    """
    order = np.argsort(D, axis=0, kind="stable")
    n_test = D.shape[1]
    cols = np.arange(n_test)
    counts = np.zeros((n_test, n_classes), dtype=np.int64)
    sums = np.zeros((n_test, n_classes))
    out = {}
    done = 0
    for k in sorted(set(ks)):
        for r in range(done, k):
            nb = order[r]
            cls = train_codes[nb]
            counts[cols, cls] += 1
            sums[cols, cls] += D[nb, cols]
        done = k
        best = counts.max(axis=1, keepdims=True)
        tied = counts == best
        # lexicographic: most votes, then smallest summed distance, then lowest code
        masked = np.where(tied, sums, np.inf)
        low = masked.min(axis=1, keepdims=True)
        out[k] = np.argmax(tied & (masked == low), axis=1)
    return out


def knn_predict(
    train: CategoricalDataset,
    labels,
    test: CategoricalDataset,
    delta: BlockDiagonalDelta,
    k: int,
    unseen: str = "error",
) -> Labeling:
    """Majority vote among the ``k`` training rows closest to each test row.

    ``delta`` must have been estimated on ``train`` (checked through its
    source fingerprint when it has one).
    """
    labels = _as_labeling(labels)
    return knn_predict_grid(train, labels, test, delta, [k], unseen)[k]


def knn_predict_grid(train, labels, test, delta, ks, unseen="error") -> dict[int, Labeling]:
    labels = _as_labeling(labels)
    train_x = train.without_response()
    if len(labels) != train_x.n_rows:
        raise DataError(f"{len(labels)} labels for {train_x.n_rows} training rows")
    for k in ks:
        if k < 1 or k > train_x.n_rows:
            raise DataError(f"k={k} must lie in 1..{train_x.n_rows}")
    _check_source(delta, train_x)
    D = cross_distances(train_x, test, delta, unseen)
    votes = _knn_votes(D.values, labels.codes, labels.n_classes, ks)
    return {k: Labeling(v, labels.classes) for k, v in votes.items()}


def _check_source(delta: BlockDiagonalDelta, train: CategoricalDataset) -> None:
    if delta.source is not None and delta.source != train.fingerprint:
        raise DataError("Delta was not estimated on these training rows")


# -- partitioning around medoids --------------------------------------------

@dataclass(frozen=True, eq=False)
class PamResult:
    medoids: np.ndarray
    labels: np.ndarray
    cost: float
    iterations: int
    converged: bool
    cost_history: tuple[float, ...] = ()
    repairs: int = 0

    @property
    def k(self) -> int:
        return self.medoids.size


def _assign(D: np.ndarray, medoids: np.ndarray) -> np.ndarray:
    return np.argmin(D[:, medoids], axis=1)


def _cost(D: np.ndarray, medoids: np.ndarray, labels: np.ndarray) -> float:
    return float(D[np.arange(D.shape[0]), medoids[labels]].sum())


def pam_fit(D: DistanceMatrix | np.ndarray, k: int, seed: int = 0, max_iter: int = 100) -> PamResult:
    """Alternating k-medoids.

    Starts from ``k`` random distinct rows, then repeats: assign every row to
    its nearest medoid (ties to the lowest medoid position), and replace each
    medoid by the member with the smallest distance sum to its cluster (ties to
    the lowest row index). Stops when the set of medoids no longer changes.
    A cluster left empty by the assignment gets, as new medoid, the
    non-medoid row farthest from its current medoid; such repairs are counted.
    """
    if isinstance(D, DistanceMatrix):
        if not D.symmetric:
            raise DataError("PAM needs a symmetric distance matrix; symmetrize it first")
        D = D.values
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if D.ndim != 2 or D.shape[1] != n:
        raise DataError("PAM needs a square distance matrix")
    if not 1 <= k <= n:
        raise DataError(f"k={k} must lie in 1..{n}")
    rng = np.random.default_rng(seed)
    medoids = rng.choice(n, size=k, replace=False)
    history = []
    repairs = 0
    converged = False
    it = 0
    rows = np.arange(n)
    while it < max_iter:
        it += 1
        labels = _assign(D, medoids)
        for _ in range(n):
            empty = np.setdiff1d(np.arange(k), labels)
            if empty.size == 0:
                break
            current = D[rows, medoids[labels]].copy()
            current[medoids] = -np.inf
            if np.isneginf(current).all():
                break
            medoids[empty[0]] = int(np.argmax(current))
            repairs += 1
            labels = _assign(D, medoids)
        history.append(_cost(D, medoids, labels))
        new = medoids.copy()
        for c in range(k):
            members = np.flatnonzero(labels == c)
            if members.size:
                within = D[np.ix_(members, members)].sum(axis=1)
                new[c] = members[np.argmin(within)]
        if set(new.tolist()) == set(medoids.tolist()):
            converged = True
            break
        medoids = new
    labels = _assign(D, medoids)
    cost = _cost(D, medoids, labels)
    if not history or cost != history[-1]:
        history.append(cost)
    return PamResult(medoids, labels, cost, it, converged, tuple(history), repairs)


def pam_assign(
    train: CategoricalDataset,
    medoid_rows: Sequence[int],
    test: CategoricalDataset,
    delta: BlockDiagonalDelta,
    unseen: str = "error",
) -> np.ndarray:
    """Cluster of each test row: position of its nearest medoid (ties to the lowest)."""
    medoid_rows = np.asarray(medoid_rows, dtype=np.intp)
    M = cross_distances(subset(train.without_response(), medoid_rows), test, delta, unseen)
    return np.argmin(M.values, axis=0)


# -- metrics ----------------------------------------------------------------

def accuracy(pred, truth) -> float:
    p = pred.codes if isinstance(pred, Labeling) else np.asarray(pred)
    t = truth.codes if isinstance(truth, Labeling) else np.asarray(truth)
    if isinstance(pred, Labeling) and isinstance(truth, Labeling) and pred.classes != truth.classes:
        p = np.asarray(pred.labels())
        t = np.asarray(truth.labels())
    if p.shape != t.shape:
        raise DataError(f"{p.size} predictions for {t.size} true labels")
    if p.size == 0:
        raise DataError("accuracy of an empty labeling")
    return float(np.mean(p == t))


def _pairs(x) -> int:
    return sum(comb(int(v), 2) for v in x)


def adjusted_rand_index(a, b) -> float:
    """Hubert-Arabie adjusted Rand index of two partitions.

    When the index is undefined (expected equals maximum), returns 1 for
    identical partitions and 0 otherwise.
    """
    a = np.asarray(a.codes if isinstance(a, Labeling) else encode_labels(a)[0])
    b = np.asarray(b.codes if isinstance(b, Labeling) else encode_labels(b)[0])
    if a.shape != b.shape:
        raise DataError(f"labelings of length {a.size} and {b.size}")
    n = a.size
    if n < 2:
        raise DataError("ARI needs at least two items")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    index = _pairs(table.ravel())
    sum_a = _pairs(table.sum(axis=1))
    sum_b = _pairs(table.sum(axis=0))
    # scaled by 2 * C(n, 2) so everything stays an exact integer
    pairs = comb(n, 2)
    num = 2 * (index * pairs - sum_a * sum_b)
    den = pairs * (sum_a + sum_b) - 2 * sum_a * sum_b
    if den == 0:
        identical = (table > 0).sum() == table.shape[0] == table.shape[1]
        return 1.0 if identical else 0.0
    return num / den


# -- cross-validation -------------------------------------------------------

@dataclass(frozen=True)
class CvCell:
    measure: str
    param: int
    repeat: int
    fold: int
    value: float
    error: str = ""


@dataclass(frozen=True)
class CvSummary:
    measure: str
    param: int
    mean: float
    sd: float
    n_repeats: int
    n_failed: int


@dataclass
class CvReport:
    """Per-cell metrics plus mean and standard deviation over repeats.

    A repeat's value is the mean over its folds; ``mean``/``sd`` are taken over
    those per-repeat values. ``best`` maps each measure to the chosen
    parameter (largest mean, ties to the smaller parameter).
    """

    task: str
    metric: str
    cells: list[CvCell]
    summary: list[CvSummary] = field(default_factory=list)
    best: dict[str, int] = field(default_factory=dict)

    def summarize(self) -> None:
        groups: dict[tuple[str, int], list[CvCell]] = {}
        for c in self.cells:
            groups.setdefault((c.measure, c.param), []).append(c)
        self.summary = []
        for (measure, param), cells in groups.items():
            per_repeat: dict[int, list[float]] = {}
            for c in cells:
                if not c.error:
                    per_repeat.setdefault(c.repeat, []).append(c.value)
            reps = np.array([np.mean(v) for _, v in sorted(per_repeat.items())])
            mean = float(reps.mean()) if reps.size else float("nan")
            sd = float(reps.std(ddof=1)) if reps.size > 1 else 0.0 if reps.size else float("nan")
            failed = sum(1 for c in cells if c.error)
            self.summary.append(CvSummary(measure, param, mean, sd, int(reps.size), failed))
        self.best = {}
        for s in self.summary:
            if np.isnan(s.mean):
                continue
            cur = self.best.get(s.measure)
            if cur is None:
                self.best[s.measure] = s.param
                continue
            cur_mean = self.lookup(s.measure, cur).mean
            if s.mean > cur_mean or (s.mean == cur_mean and s.param < cur):
                self.best[s.measure] = s.param

    def lookup(self, measure: str, param: int) -> CvSummary:
        for s in self.summary:
            if s.measure == measure and s.param == param:
                return s
        raise KeyError((measure, param))

    def best_summary(self, measure: str) -> CvSummary:
        return self.lookup(measure, self.best[measure])

    def cells_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["measure", "param", "repeat", "fold", self.metric, "error"])
        for c in self.cells:
            w.writerow([c.measure, c.param, c.repeat, c.fold, format_float(c.value), c.error])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["measure", "param", f"mean_{self.metric}", f"sd_{self.metric}", "n_repeats", "n_failed", "best"])
        for s in self.summary:
            w.writerow([
                s.measure, s.param, format_float(s.mean), format_float(s.sd),
                s.n_repeats, s.n_failed, int(self.best.get(s.measure) == s.param),
            ])
        return buf.getvalue()


def cell_seed(seed: int, repeat: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, repeat, fold]).generate_state(1)[0])


def _run_cell(ds, labels, spec, name, k_grid, plan, task, r, f, unseen, symmetrize_d, seed):
    from .measures import build_delta

    train_idx, test_idx = plan.split(r, f)
    train = subset(ds, train_idx)
    test = subset(ds, test_idx)
    y_train = labels.take(train_idx)
    y_test = labels.take(test_idx)
    params = list(k_grid) if task == "knn" else [labels.n_classes]
    try:
        delta = build_delta(spec, train, y_train.labels() if spec.is_supervised else None)
        if task == "knn":
            usable = [k for k in params if k <= train.n_rows]
            preds = knn_predict_grid(train, y_train, test, delta, usable, unseen)
            return [
                CvCell(name, k, r, f, accuracy(preds[k], y_test)) if k in preds
                else CvCell(name, k, r, f, float("nan"), f"k={k} exceeds {train.n_rows} training rows")
                for k in params
            ]
        D = pairwise_distances(train, delta, unseen)
        if not D.symmetric and symmetrize_d:
            D = symmetrize(D)
        fit = pam_fit(D, labels.n_classes, seed=cell_seed(seed, r, f))
        clusters = pam_assign(train, fit.medoids, test, delta, unseen)
        return [CvCell(name, params[0], r, f, adjusted_rand_index(clusters, y_test.codes))]
    except CatDissimError as exc:
        return [CvCell(name, p, r, f, float("nan"), f"{type(exc).__name__}: {exc}") for p in params]


def cross_validate(
    ds: CategoricalDataset,
    labels,
    measures: Sequence[MeasureSpec | str],
    k_grid: Sequence[int] = DEFAULT_K_GRID,
    plan: FoldPlan | None = None,
    task: str = "knn",
    unseen: str = "error",
    symmetrize_d: bool = False,
    seed: int = 0,
    threads: int = 1,
) -> CvReport:
    """Repeated k-fold evaluation of dissimilarity measures.

    For every measure, repeat and fold, ``Delta`` is estimated on the training
    rows only. ``task="knn"`` scores test accuracy for each ``k`` in
    ``k_grid``; ``task="pam"`` fits k-medoids on the training distances with
    ``k`` = number of classes, assigns test rows to the nearest medoid and
    scores the adjusted Rand index against the true classes. Failures in a
    cell (e.g. an unseen category) are recorded in that cell.
    """
    if task not in ("knn", "pam"):
        raise DataError(f"task must be 'knn' or 'pam', got {task!r}")
    labels = _as_labeling(labels)
    ds = ds.without_response()
    if len(labels) != ds.n_rows:
        raise DataError(f"{len(labels)} labels for {ds.n_rows} rows")
    if plan is None:
        from .dataset import split_folds

        plan = split_folds(ds, labels, seed=seed)
    if plan.n_rows != ds.n_rows:
        raise DataError("fold plan does not cover the dataset")
    specs = [MeasureSpec(m) if isinstance(m, str) else m for m in measures]
    names = [s.measure for s in specs]
    names = [n if names.count(n) == 1 else f"{n}#{s.fingerprint[:6]}" for n, s in zip(names, specs)]
    jobs = [
        (spec, name, r, f)
        for spec, name in zip(specs, names)
        for r in range(plan.n_repeats)
        for f in range(plan.n_folds)
    ]

    def run(job):
        spec, name, r, f = job
        return _run_cell(ds, labels, spec, name, k_grid, plan, task, r, f, unseen, symmetrize_d, seed)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    cells = [c for chunk in results for c in chunk]
    report = CvReport(task, "accuracy" if task == "knn" else "ari", cells)
    report.summarize()
    return report
