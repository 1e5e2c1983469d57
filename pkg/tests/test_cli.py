import json
import shutil

import pytest

from conftest import toy_manifest, write_toy_csv
from kanbench import autodiff as ad
from kanbench import cli
from kanbench.data import load_manifest


def report_bytes(out_dir):
    root = out_dir / "report"
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def count_lines(path):
    return sum(1 for line in path.read_text().splitlines() if line.strip())


@pytest.fixture
def two_toy_dir(tmp_path):
    d = tmp_path / "data"
    d.mkdir()
    write_toy_csv(d / "a.csv", 200, seed=1)
    write_toy_csv(d / "b.csv", 220, seed=2)
    manifest = {"datasets": [toy_manifest(200, name="toy_a", file="a.csv"),
                             toy_manifest(220, name="toy_b", file="b.csv")]}
    (d / "manifest.json").write_text(json.dumps(manifest))
    return d


SMALL = ["--seeds", "0,1", "--width-indices", "1,2", "--epochs", "2"]


class TestDataValidate:
    def test_breast_cancer_pass(self, breast_cancer_dir, tmp_path, capsys):
        d = tmp_path / "d"
        d.mkdir()
        shutil.copy(breast_cancer_dir / "wdbc.data", d / "wdbc.data")
        code = cli.main(["data", "validate", "--data-dir", str(d)])
        out = capsys.readouterr().out
        assert code == cli.EXIT_VALIDATION          # the other eight files are absent
        assert "PASS  breast_cancer" in out
        assert "FAIL  poker" in out and "poker-hand-training-true.data" in out
        assert "1 PASS, 8 FAIL" in out

    def test_truncated_file(self, breast_cancer_dir, tmp_path, capsys):
        lines = (breast_cancer_dir / "wdbc.data").read_text().splitlines()
        (tmp_path / "wdbc.data").write_text("\n".join(lines[:500]) + "\n")
        cli.main(["data", "validate", "--data-dir", str(tmp_path)])
        line = next(l for l in capsys.readouterr().out.splitlines() if "breast_cancer" in l)
        assert line.startswith("FAIL") and "expected 569" in line

    def test_all_pass_exits_zero(self, toy_data_dir, capsys):
        assert cli.main(["data", "validate", "--data-dir", str(toy_data_dir)]) == cli.EXIT_OK

    def test_fetch_lists_urls(self, tmp_path, capsys):
        assert cli.main(["data", "fetch", "--data-dir", str(tmp_path)]) == cli.EXIT_OK
        out = capsys.readouterr().out
        for spec in load_manifest().values():
            assert spec.name in out


class TestBench:
    def test_breast_cancer_full_grid_and_resume(self, breast_cancer_dir, tmp_path, capsys):
        out = tmp_path / "out"
        args = ["bench", "--data-dir", str(breast_cancer_dir), "--datasets", "breast_cancer",
                "--output-dir", str(out), "--epochs", "1"]
        assert cli.main(args) == cli.EXIT_OK
        assert count_lines(out / "results.jsonl") == 100
        first = report_bytes(out)
        capsys.readouterr()
        assert cli.main(args) == cli.EXIT_OK
        assert "0 new runs" in capsys.readouterr().out
        assert count_lines(out / "results.jsonl") == 100
        assert report_bytes(out) == first

    def test_report_byte_identical(self, two_toy_dir, tmp_path):
        out = tmp_path / "out"
        assert cli.main(["bench", "--data-dir", str(two_toy_dir), "--output-dir", str(out), *SMALL]) == 0
        from_bench = report_bytes(out)
        shutil.rmtree(out / "report")
        assert cli.main(["report", str(out)]) == 0
        assert report_bytes(out) == from_bench
        text = (out / "report" / "report.txt").read_text()
        assert text.count("== ") == 2 and "== toy_a" in text and "== toy_b" in text
        assert from_bench["table.csv"].decode().count("\n") == 1 + 4

    def test_overrides_echoed(self, two_toy_dir, tmp_path):
        out = tmp_path / "out"
        cli.main(["bench", "--data-dir", str(two_toy_dir), "--datasets", "toy_a",
                  "--output-dir", str(out), *SMALL])
        rec = json.loads((out / "results.jsonl").read_text().splitlines()[0])
        assert rec["overrides"]["epochs"] == 2
        assert rec["overrides"]["seeds"] == [0, 1]
        assert rec["environment"]["kernel_backend"] in ("python", "cython")

    def test_force_reruns(self, two_toy_dir, tmp_path):
        out = tmp_path / "out"
        base = ["bench", "--data-dir", str(two_toy_dir), "--datasets", "toy_a", "--output-dir", str(out),
                "--width-indices", "1", "--seeds", "0", "--epochs", "1"]
        cli.main(base)
        cli.main(base + ["--force"])
        assert count_lines(out / "results.jsonl") == 4

    def test_workers(self, two_toy_dir, tmp_path):
        serial, parallel = tmp_path / "s", tmp_path / "p"
        common = ["bench", "--data-dir", str(two_toy_dir), "--datasets", "toy_a", *SMALL]
        cli.main(common + ["--output-dir", str(serial)])
        cli.main(common + ["--output-dir", str(parallel), "--workers", "2"])

        def metrics(path):
            recs = [json.loads(l) for l in (path / "results.jsonl").read_text().splitlines()]
            return {r["key"]: r["metrics"] for r in recs}
        assert metrics(serial) == metrics(parallel)

    def test_unknown_dataset_is_usage_error(self, tmp_path, capsys):
        code = cli.main(["bench", "--data-dir", str(tmp_path), "--datasets", "nope",
                         "--output-dir", str(tmp_path / "o")])
        assert code == cli.EXIT_USAGE

    def test_missing_data_is_validation_error(self, tmp_path):
        code = cli.main(["bench", "--data-dir", str(tmp_path), "--datasets", "poker",
                         "--output-dir", str(tmp_path / "o")])
        assert code == cli.EXIT_VALIDATION


class TestConfigPrecedence:
    def parse(self, argv):
        return cli.effective_config(cli.build_parser().parse_args(argv))

    def test_flag_beats_file_beats_default(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"epochs": 3, "batch_size": 64}))
        cfg = self.parse(["bench", "--config", str(cfg_file), "--epochs", "7"])
        assert cfg["epochs"] == 7 and cfg["batch_size"] == 64 and cfg["lr"] == 1e-2

    def test_unknown_key(self, tmp_path, capsys):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"epochz": 3}))
        assert cli.main(["bench", "--config", str(cfg_file)]) == cli.EXIT_USAGE
        assert "epochz" in capsys.readouterr().err

    def test_every_flag_has_a_file_key(self):
        parser = cli.build_parser()
        bench_parser = parser._subparsers._group_actions[0].choices["bench"]
        dests = {a.dest for a in bench_parser._actions} - {"help", "config", "func"}
        assert dests <= set(cli.DEFAULTS)

    def test_prints_effective_config(self, toy_data_dir, tmp_path, capsys):
        cli.main(["bench", "--data-dir", str(toy_data_dir), "--output-dir", str(tmp_path / "o"),
                  "--width-indices", "1", "--seeds", "0", "--epochs", "1"])
        assert capsys.readouterr().out.startswith("effective config:")


class TestReport:
    def test_empty_is_usage_error(self, tmp_path):
        assert cli.main(["report", str(tmp_path)]) == cli.EXIT_USAGE

    def test_corrupt_line_warning(self, toy_data_dir, tmp_path, capsys):
        out = tmp_path / "out"
        cli.main(["bench", "--data-dir", str(toy_data_dir), "--output-dir", str(out),
                  "--width-indices", "1", "--seeds", "0", "--epochs", "1"])
        with open(out / "results.jsonl", "a") as fh:
            fh.write("{truncated\n")
        capsys.readouterr()
        assert cli.main(["report", str(out)]) == cli.EXIT_OK
        assert "line 3: skipped corrupt record" in capsys.readouterr().err


class TestGradcheck:
    def test_passes(self, capsys):
        assert cli.main(["gradcheck", "--trials", "2"]) == cli.EXIT_OK
        lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith(("PASS", "FAIL"))]
        ops = [l.split()[1] for l in lines]
        assert len(ops) == len(set(ops)) == 11

    def test_injected_sign_bug_fails(self, monkeypatch, capsys):
        real = ad.silu

        def buggy(x):
            out = real(x)
            if out._backward is not None:
                good = out._backward
                out._backward = lambda g: good(-g)
            return out

        monkeypatch.setattr(ad, "silu", buggy)
        assert cli.main(["gradcheck", "--trials", "1"]) == cli.EXIT_GRADCHECK
        assert "FAIL  silu" in capsys.readouterr().out
