import json
import os
from pathlib import Path

import numpy as np
import pytest

REPO = Path(__file__).resolve().parents[1]


def write_wdbc(path: Path) -> bool:
    """Write UCI-format wdbc.data from scikit-learn's bundled copy; False if unavailable."""
    try:
        from sklearn.datasets import load_breast_cancer
    except ImportError:
        return False
    ds = load_breast_cancer()
    with open(path, "w") as fh:
        for i, (row, target) in enumerate(zip(ds.data, ds.target)):
            label = "M" if target == 0 else "B"
            fh.write(",".join([str(i + 1), label] + [repr(float(v)) for v in row]) + "\n")
    return True


def bench_data_dir() -> Path:
    return Path(os.environ.get("KANBENCH_DATA_DIR", REPO / "data"))


@pytest.fixture(scope="session")
def breast_cancer_dir(tmp_path_factory):
    """A data directory holding a real wdbc.data (staged dir, else scikit-learn copy)."""
    staged = bench_data_dir()
    if (staged / "wdbc.data").exists():
        return staged
    out = tmp_path_factory.mktemp("bc")
    if not write_wdbc(out / "wdbc.data"):
        pytest.skip("no wdbc.data staged and scikit-learn unavailable")
    return out


TOY_COLUMNS = ["num_a", "num_b", "const", "color", "label"]


def toy_manifest(rows: int, name: str = "toy", file: str = "toy.csv", **extra) -> dict:
    entry = {
        "name": name, "display_name": name.title(), "task": "binary", "n_classes": 2,
        "files": [{"file": file}], "header": True, "delimiter": ",", "columns": None,
        "drop_columns": [], "label_column": "label", "categorical_columns": ["color"],
        "positive_class": "yes", "class_order": ["no", "yes"], "expected_rows": rows,
        "expected_features": 4, "paper_features": 4, "has_missing": True, "data_type": "mixed",
        "missing_sentinels": ["", "?"], "strip_label_period": False, "width_scale": 1,
        "source_urls": [], "notes": "",
    }
    entry.update(extra)
    return entry


def write_toy_csv(path: Path, rows: int, seed: int = 0) -> None:
    rng = np.random.default_rng(seed)
    colors = ["red", "green", "blue"]
    with open(path, "w") as fh:
        fh.write(",".join(TOY_COLUMNS) + "\n")
        for i in range(rows):
            a = rng.normal(2.0, 3.0)
            b = rng.uniform(-5, 5)
            color = colors[i % 3]
            label = "yes" if a + 0.3 * b + (color == "red") > 2.5 else "no"
            a_txt = "?" if i % 17 == 0 else repr(a)
            color_txt = "" if i % 23 == 0 else color
            fh.write(f"{a_txt},{b!r},7.0,{color_txt},{label}\n")


@pytest.fixture
def toy_data_dir(tmp_path):
    rows = 300
    write_toy_csv(tmp_path / "toy.csv", rows)
    (tmp_path / "manifest.json").write_text(json.dumps({"datasets": [toy_manifest(rows)]}))
    return tmp_path


# ------------------------------------------------------- acceptance summary

_ACCEPTANCE: list[tuple[str, str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("verdict", "")
        if report.skipped and not detail:
            detail = str(report.longrepr[-1]) if isinstance(report.longrepr, tuple) else ""
        _ACCEPTANCE.append((report.nodeid.split("::")[-1], report.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, detail in _ACCEPTANCE:
        tag = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"{tag}  {name}: {detail}" if detail else f"{tag}  {name}")
