import csv
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from catdissim.dataset import CategoricalDataset, VariableSchema, parse_csv  # noqa: E402
from catdissim.synthetic import make_classification  # noqa: E402

_CRITERIA: dict[str, str] = {}


def random_dataset(rng, n, n_vars, max_levels, min_levels=2):
    """Dataset whose variables each show every level at least once (when n allows)."""
    variables, cols = [], []
    for j in range(n_vars):
        q = int(rng.integers(min_levels, max_levels + 1))
        col = rng.integers(q, size=n)
        col[: min(q, n)] = np.arange(min(q, n))
        rng.shuffle(col)
        cols.append(col)
        variables.append(VariableSchema(f"v{j}", tuple(f"l{c}" for c in range(q))))
    return CategoricalDataset(tuple(variables), np.column_stack(cols))


@pytest.fixture
def toy():
    return parse_csv("c1,c2\na,x\nb,x\na,y\n")


@pytest.fixture(scope="session")
def synthetic():
    return make_classification(n=500, seed=0)


def write_table(path, ds, labels=None, response="class"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(ds.names) + ([response] if labels is not None else []))
        for i, row in enumerate(ds.decode()):
            w.writerow(row + ([labels[i]] if labels is not None else []))
    return path


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    name = report.nodeid.split("::")[-1]
    if "test_acceptance.py" in report.nodeid and name.startswith("test_criterion_"):
        _CRITERIA[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in sorted(_CRITERIA.items()):
        terminalreporter.write_line(f"{status}  {name[len('test_criterion_'):]}")
