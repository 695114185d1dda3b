"""Command line: ``catdissim {delta,dist,knn,pam,cv,check,bench} ...``.

Options can also come from ``--config FILE`` (JSON or flat ``key=value``
lines); explicit flags win. Each run writes ``config.json`` to ``--out``, which
can be fed back through ``--config`` to repeat it.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .association import read_weights_csv
from .bench import bench_distances, bench_tvd
from .dataset import CategoricalDataset, read_csv, split_folds, split_response
from .delta import MEASURES, MeasureSpec, format_float
from .distance import (
    check_metric_properties,
    cross_distances,
    pairwise_distances,
    symmetrize,
)
from .errors import CatDissimError, DataError, UsageError
from .learners import (
    DEFAULT_K_GRID,
    Labeling,
    accuracy,
    adjusted_rand_index,
    cross_validate,
    knn_predict,
    pam_fit,
)
from .measures import build_delta


@dataclass
class RunConfig:
    command: str = ""
    inputs: list[str] = field(default_factory=list)
    against: str | None = None
    test: str | None = None
    measure: str = "matching"
    measures: list[str] = field(default_factory=list)
    weights: str | None = None
    response: str | None = None
    supervised_mode: str | None = None
    lin_guard: float | str = 0.0
    kl_floor: float = 1e-10
    kl_directed: bool = False
    unseen: str = "error"
    task: str = "knn"
    k: int | None = None
    k_grid: list[int] = field(default_factory=lambda: list(DEFAULT_K_GRID))
    folds: int = 5
    repeats: int = 10
    seed: int = 0
    max_iter: int = 100
    symmetrize: bool = False
    threads: int | None = None
    delimiter: str = ","
    no_header: bool = False
    na_policy: str = "error"
    bench_q: list[int] = field(default_factory=lambda: [4, 8, 12, 16])
    bench_n: int = 1000
    bench_vars: int = 10
    out: str = "out"

    @classmethod
    def fields(cls) -> dict[str, dataclasses.Field]:
        return {f.name: f for f in dataclasses.fields(cls)}

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _split_list(text, cast=str) -> list:
    if isinstance(text, list):
        return [cast(x) for x in text]
    return [cast(x.strip()) for x in str(text).split(",") if x.strip()]


def _coerce(name: str, value):
    """Cast a raw config value (from a key=value file or JSON) to the field type."""
    try:
        return _cast(name, value)
    except (TypeError, ValueError):
        raise UsageError(f"invalid value for {name}: {value!r}") from None


def _cast(name: str, value):
    if value is None:
        return None
    if name in ("inputs", "measures"):
        return _split_list(value)
    if name in ("k_grid", "bench_q"):
        return _split_list(value, int)
    if name in ("kl_directed", "symmetrize", "no_header"):
        if isinstance(value, bool):
            return value
        return str(value).strip().lower() in ("1", "true", "yes", "on")
    if name in ("folds", "repeats", "seed", "max_iter", "bench_n", "bench_vars", "k", "threads"):
        return int(value)
    if name == "kl_floor":
        return float(value)
    if name == "lin_guard":
        return "auto" if str(value) == "auto" else float(value)
    return value


def load_config_file(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            raw[key.strip().replace("-", "_")] = value.strip()
    if not isinstance(raw, dict):
        raise UsageError(f"{path}: config must be an object")
    known = RunConfig.fields()
    unknown = set(raw) - set(known)
    if unknown:
        raise UsageError(f"{path}: unknown config keys {sorted(unknown)}")
    return {k: _coerce(k, v) for k, v in raw.items()}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = _Parser(add_help=False, argument_default=S)
    common.add_argument("inputs", nargs="*", help="input CSV file(s)")
    common.add_argument("--config", help="JSON or key=value file with default options")
    common.add_argument("--measure", choices=[m for m in MEASURES if m != "custom"])
    common.add_argument("--measures", help="comma-separated measures (cv, check)")
    common.add_argument("--weights", help="CSV of pair weights, header = variable names")
    common.add_argument("--response", help="name of the class column")
    common.add_argument("--supervised-mode", choices=("supervised", "full"), dest="supervised_mode")
    common.add_argument("--lin-guard", nargs="?", const="auto", dest="lin_guard",
                        help="clamp for Lin's singular pairs; bare flag (after the input file) uses 1/(2n)")
    common.add_argument("--kl-floor", type=float, dest="kl_floor")
    common.add_argument("--kl-directed", action="store_true", dest="kl_directed")
    common.add_argument("--unseen", choices=("error", "max"))
    common.add_argument("--k", type=int)
    common.add_argument("--k-grid", dest="k_grid")
    common.add_argument("--folds", type=int)
    common.add_argument("--repeats", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--max-iter", type=int, dest="max_iter")
    common.add_argument("--symmetrize", action="store_true")
    common.add_argument("--threads", type=int)
    common.add_argument("--delimiter")
    common.add_argument("--no-header", action="store_true", dest="no_header")
    common.add_argument("--na-policy", choices=("error", "drop_row"), dest="na_policy")
    common.add_argument("--out", help="output directory (default: out)")

    parser = _Parser(prog="catdissim", description="Distances for categorical data.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("delta", parents=[common], help="write category dissimilarity blocks")
    p = sub.add_parser("dist", parents=[common], help="distance matrix within or between files")
    p.add_argument("--against", default=S)
    p = sub.add_parser("knn", parents=[common], help="k-nearest-neighbour predictions")
    p.add_argument("--test", default=S)
    sub.add_parser("pam", parents=[common], help="k-medoids clustering")
    p = sub.add_parser("cv", parents=[common], help="repeated cross-validation")
    p.add_argument("--task", choices=("knn", "pam"), default=S)
    sub.add_parser("check", parents=[common], help="metric properties of each measure")
    p = sub.add_parser("bench", parents=[common], help="timing comparisons")
    p.add_argument("--bench-q", dest="bench_q", default=S)
    p.add_argument("--bench-n", dest="bench_n", type=int, default=S)
    p.add_argument("--bench-vars", dest="bench_vars", type=int, default=S)
    return parser


def resolve_config(argv) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    values = {}
    if "config" in ns:
        values.update(load_config_file(ns.pop("config")))
    for key, value in ns.items():
        if key == "inputs" and not value and "inputs" in values:
            continue
        values[key] = _coerce(key, value)
    return RunConfig(**values)


# -- helpers ----------------------------------------------------------------

def _parse_opts(cfg: RunConfig) -> dict:
    return {"has_header": not cfg.no_header, "delimiter": cfg.delimiter, "na_policy": cfg.na_policy}


def _load(cfg: RunConfig, path, schema=None) -> tuple[CategoricalDataset, list[str] | None]:
    try:
        opts = _parse_opts(cfg)
        if schema is None:
            ds = read_csv(path, **opts)
        else:
            with open(path, newline="", encoding="utf-8") as fh:
                from .dataset import parse_csv

                ds = parse_csv(fh, schema=schema, **opts)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    if cfg.response:
        return split_response(ds, cfg.response)
    return ds, None


def _load_pair(cfg: RunConfig, path_a, path_b):
    """Load two files on a common schema: levels new in ``path_b`` are appended
    (and are unobserved in ``path_a``)."""
    a, ya = _load(cfg, path_a)
    if cfg.response:
        # parse the second file against the full schema, response column included
        full = read_csv(path_a, **_parse_opts(cfg))
        b_full = _load_raw(cfg, path_b, full.variables)
        b, yb = split_response(b_full, cfg.response)
    else:
        b, yb = _load(cfg, path_b, a.variables)
    a = a.with_schema(b.variables)
    return a, ya, b, yb


def _load_raw(cfg, path, schema):
    from .dataset import parse_csv

    with open(path, newline="", encoding="utf-8") as fh:
        return parse_csv(fh, schema=schema, **_parse_opts(cfg))


def _spec(cfg: RunConfig, measure: str | None = None, ds: CategoricalDataset | None = None) -> MeasureSpec:
    measure = measure or cfg.measure
    if cfg.supervised_mode:
        if measure not in ("tvd", "kl", "chisq"):
            raise UsageError("--supervised-mode needs an association measure (tvd, kl, chisq)")
        measure = f"supervised_{'full_' if cfg.supervised_mode == 'full' else ''}{measure}"
    weights = None
    if cfg.weights:
        if ds is None:
            raise UsageError("--weights needs a dataset")
        weights = read_weights_csv(cfg.weights, ds.names)
    return MeasureSpec(
        measure, weights=weights, lin_guard=cfg.lin_guard,
        kl_floor=cfg.kl_floor, kl_directed=cfg.kl_directed,
    )


def _need_labels(spec: MeasureSpec, labels):
    if spec.is_supervised and labels is None:
        raise UsageError(f"measure {spec.measure!r} needs --response")


def _one_input(cfg: RunConfig) -> str:
    if len(cfg.inputs) != 1:
        raise UsageError(f"{cfg.command} takes exactly one input file")
    return cfg.inputs[0]


def _write_common(cfg: RunConfig, out: Path, ds: CategoricalDataset | None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if ds is not None:
        (out / "manifest.json").write_text(json.dumps(ds.manifest(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- commands ---------------------------------------------------------------

def cmd_delta(cfg: RunConfig) -> dict:
    ds, labels = _load(cfg, _one_input(cfg))
    spec = _spec(cfg, ds=ds)
    _need_labels(spec, labels)
    delta = build_delta(spec, ds, labels)
    out = Path(cfg.out)
    _write_common(cfg, out, ds)
    delta.write_csv(out)
    return {"blocks": len(delta), "symmetric": delta.symmetric, "zero_diagonal": delta.zero_diagonal}


def cmd_dist(cfg: RunConfig) -> dict:
    path = _one_input(cfg)
    if cfg.against:
        ds, labels, other, _ = _load_pair(cfg, path, cfg.against)
    else:
        ds, labels = _load(cfg, path)
        other = None
    spec = _spec(cfg, ds=ds)
    _need_labels(spec, labels)
    delta = build_delta(spec, ds, labels)
    D = pairwise_distances(ds, delta, cfg.unseen) if other is None else cross_distances(ds, other, delta, cfg.unseen)
    if cfg.symmetrize:
        D = symmetrize(D)
    out = Path(cfg.out)
    _write_common(cfg, out, ds)
    D.write_csv(out / "distances.csv")
    D.write_binary(out / "distances.bin")
    return {"shape": list(D.shape), "symmetric": D.symmetric, "zero_diagonal": D.zero_diagonal}


def cmd_knn(cfg: RunConfig) -> dict:
    if not cfg.test:
        raise UsageError("knn needs --test FILE")
    if cfg.k is None:
        raise UsageError("knn needs --k")
    if not cfg.response:
        raise UsageError("knn needs --response (the class column of the training file)")
    train, y_train, test, y_test = _load_pair(cfg, _one_input(cfg), cfg.test)
    spec = _spec(cfg, ds=train)
    delta = build_delta(spec, train, y_train)
    pred = knn_predict(train, y_train, test, delta, cfg.k, cfg.unseen)
    out = Path(cfg.out)
    _write_common(cfg, out, train)
    labels = pred.labels()
    if y_test is not None:
        rows = [(i, p, t) for i, (p, t) in enumerate(zip(labels, y_test))]
        _write_rows(out / "predictions.csv", ["row", "predicted", "truth"], rows)
    else:
        _write_rows(out / "predictions.csv", ["row", "predicted"], list(enumerate(labels)))
    result = {"n_test": len(labels), "k": cfg.k}
    if y_test is not None:
        result["accuracy"] = accuracy(labels, y_test)
    _write_json(out / "metrics.json", result)
    return result


def cmd_pam(cfg: RunConfig) -> dict:
    if cfg.k is None:
        raise UsageError("pam needs --k")
    ds, labels = _load(cfg, _one_input(cfg))
    spec = _spec(cfg, ds=ds)
    _need_labels(spec, labels)
    delta = build_delta(spec, ds, labels)
    D = pairwise_distances(ds, delta, cfg.unseen)
    if not D.symmetric:
        if not cfg.symmetrize:
            raise DataError("distances are not symmetric; rerun with --symmetrize")
        D = symmetrize(D)
    fit = pam_fit(D, cfg.k, seed=cfg.seed, max_iter=cfg.max_iter)
    out = Path(cfg.out)
    _write_common(cfg, out, ds)
    _write_rows(out / "medoids.csv", ["cluster", "row"], list(enumerate(fit.medoids.tolist())))
    rows = [(i, c) + ((labels[i],) if labels else ()) for i, c in enumerate(fit.labels.tolist())]
    _write_rows(out / "assignments.csv", ["row", "cluster"] + (["truth"] if labels else []), rows)
    result = {
        "k": cfg.k,
        "medoids": fit.medoids.tolist(),
        "cost": float(format_float(fit.cost)),
        "iterations": fit.iterations,
        "converged": fit.converged,
        "repairs": fit.repairs,
    }
    if labels:
        result["ari"] = float(format_float(adjusted_rand_index(fit.labels, labels)))
    _write_json(out / "pam.json", result)
    return result


def cmd_cv(cfg: RunConfig) -> dict:
    if not cfg.response:
        raise UsageError("cv needs --response")
    ds, labels = _load(cfg, _one_input(cfg))
    names = cfg.measures or [cfg.measure]
    specs = [_spec(cfg, m, ds) for m in names]
    y = Labeling.from_values(labels)
    plan = split_folds(ds, y, cfg.folds, cfg.repeats, cfg.seed)
    report = cross_validate(
        ds, y, specs, cfg.k_grid, plan, cfg.task, cfg.unseen, cfg.symmetrize, cfg.seed,
        threads=cfg.threads or os.cpu_count() or 1,
    )
    out = Path(cfg.out)
    _write_common(cfg, out, ds)
    (out / "cv_cells.csv").write_text(report.cells_csv(), encoding="utf-8")
    (out / "cv_summary.csv").write_text(report.summary_csv(), encoding="utf-8")
    result = {}
    for m, p in report.best.items():
        s = report.lookup(m, p)
        result[m] = {"param": p, "mean": s.mean, "sd": s.sd, "failed": s.n_failed}
    return result


def cmd_check(cfg: RunConfig) -> dict:
    ds, labels = _load(cfg, _one_input(cfg))
    names = cfg.measures or [cfg.measure]
    rows, result = [], {}
    for m in names:
        spec = _spec(cfg, m, ds)
        _need_labels(spec, labels)
        report = check_metric_properties(build_delta(spec, ds, labels))
        result[spec.measure] = {
            "zero_diagonal": report.zero_diagonal,
            "symmetric": report.symmetric,
            "triangle": report.triangle,
            "metric": report.metric,
        }
        for b in report.blocks:
            rows.append((spec.measure, b.name, int(b.zero_diagonal), int(b.symmetric),
                         b.triangle_violations, format_float(b.worst_violation)))
    out = Path(cfg.out)
    _write_common(cfg, out, ds)
    _write_rows(out / "check.csv",
                ["measure", "variable", "zero_diagonal", "symmetric", "triangle_violations", "worst_violation"],
                rows)
    return result


def cmd_bench(cfg: RunConfig) -> dict:
    tvd = bench_tvd(cfg.bench_q, cfg.seed)
    dist = bench_distances(cfg.bench_n, cfg.bench_vars, seed=cfg.seed)
    out = Path(cfg.out)
    _write_common(cfg, out, None)
    _write_rows(out / "bench_tvd.csv", list(tvd[0]), [[format_float(v) for v in r.values()] for r in tvd])
    _write_json(out / "bench_distances.json", dist)
    return {"tvd": tvd, "distances": dist}


COMMANDS = {
    "delta": cmd_delta, "dist": cmd_dist, "knn": cmd_knn, "pam": cmd_pam,
    "cv": cmd_cv, "check": cmd_check, "bench": cmd_bench,
}


def main(argv=None) -> int:
    try:
        cfg = resolve_config(sys.argv[1:] if argv is None else argv)
        if cfg.command != "bench" and not cfg.inputs:
            raise UsageError(f"{cfg.command} needs an input CSV file")
        result = COMMANDS[cfg.command](cfg)
    except CatDissimError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}),
              file=sys.stderr)
        return exc.exit_code
    print(json.dumps(result, indent=2, sort_keys=True, default=_json_default))
    return 0


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


if __name__ == "__main__":
    sys.exit(main())
