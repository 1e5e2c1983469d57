"""Stage the datasets obtainable without UCI access into a data directory.

Sources:
  wdbc.data      scikit-learn's bundled copy of UCI Breast Cancer Wisconsin
                 (Diagnostic); the id column is not bundled, so a row number
                 is written in its place (the pipeline drops it).
  magic04.data   KEEL "magic" (identical to UCI MAGIC Gamma Telescope, 19,020 rows).
  spambase.data  KEEL "spambase" (4,597 rows; UCI has 4,601, so `data validate`
                 reports a row-count FAIL for it).

The KEEL files are read straight out of the ``keel-ds`` wheel, fetched with
``pip download`` (the package itself is not installed; it pins an old numpy).

    python scripts/stage_local_data.py data/
"""

import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

KEEL_FILES = {"magic": "magic04.data", "spambase": "spambase.data"}


def stage_breast_cancer(out: Path) -> None:
    from sklearn.datasets import load_breast_cancer

    ds = load_breast_cancer()
    # sklearn targets: 0 = malignant, 1 = benign
    with open(out / "wdbc.data", "w") as fh:
        for i, (row, target) in enumerate(zip(ds.data, ds.target)):
            label = "M" if target == 0 else "B"
            fh.write(",".join([str(i + 1), label] + [repr(float(v)) for v in row]) + "\n")


def stage_keel(out: Path) -> None:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp,
                        "keel-ds==0.2.5"], check=True)
        wheel = next(Path(tmp).glob("keel_ds-*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            for keel_name, target in KEEL_FILES.items():
                text = zf.read(f"keel_ds/data/balanced/raw/{keel_name}.dat").decode()
                rows = [line for line in text.splitlines() if line.strip() and not line.startswith("@")]
                (out / target).write_text("\n".join(rows) + "\n")


def main(argv):
    out = Path(argv[1] if len(argv) > 1 else "data")
    out.mkdir(parents=True, exist_ok=True)
    stage_breast_cancer(out)
    stage_keel(out)
    for p in sorted(out.iterdir()):
        print(p, sum(1 for _ in open(p)))


if __name__ == "__main__":
    main(sys.argv)
