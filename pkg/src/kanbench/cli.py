"""``kanbench`` command line.

    kanbench data validate [--data-dir DIR]
    kanbench data fetch [--data-dir DIR] [--download]
    kanbench bench [--config FILE] [--datasets a,b] [--models KAN,MLP] [--seeds 0,1,...] ...
    kanbench report OUT_DIR
    kanbench gradcheck

Precedence for every bench setting: command-line flag > config file > default.
``KANBENCH_DATA_DIR`` overrides the default data directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import urllib.request
from dataclasses import fields
from pathlib import Path

from . import kernels
from .bench import MODELS, SEEDS, WIDTH_INDICES, ConfigurationError, RunConfig, generate_grid
from .data import load_csv, preprocess, registry_for, resolve_data_dir, validate_dataset
from .gradcheck import TOLERANCE, run_suite
from .report import ResultsStore, write_report
from .runner import pending, run_configs

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_RUN = 4
EXIT_GRADCHECK = 5

log = logging.getLogger("kanbench")

HYPER_FIELDS = ("epochs", "batch_size", "lr", "gamma", "weight_decay", "beta1", "beta2", "eps",
                "grid_size", "spline_order", "domain_lo", "domain_hi")
DEFAULTS = {
    "data_dir": None,
    "output_dir": "results",
    "datasets": None,
    "models": list(MODELS),
    "seeds": list(SEEDS),
    "width_indices": list(WIDTH_INDICES),
    "workers": 1,
    "force": False,
    **{f.name: f.default for f in fields(RunConfig) if f.name in HYPER_FIELDS},
}


class UsageFailure(Exception):
    pass


def _csv_list(cast=str):
    def parse(text: str):
        return [cast(v.strip()) for v in text.split(",") if v.strip()]
    return parse


def effective_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageFailure(f"cannot read config file {args.config}: {exc}") from exc
        unknown = sorted(set(from_file) - set(DEFAULTS))
        if unknown:
            raise UsageFailure(f"unknown config keys: {unknown}")
        cfg.update(from_file)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            cfg[key] = value
    cfg["data_dir"] = str(resolve_data_dir(cfg["data_dir"]))
    return cfg


def overrides_of(cfg: dict) -> dict:
    """Settings that differ from the built-in defaults."""
    return {k: v for k, v in cfg.items() if k in DEFAULTS and DEFAULTS[k] != v and k != "data_dir"}


def cmd_data_validate(args) -> int:
    data_dir = resolve_data_dir(args.data_dir)
    registry = registry_for(data_dir)
    failed = 0
    for spec in registry.values():
        row = validate_dataset(spec, data_dir)
        failed += not row.ok
        print(f"{'PASS' if row.ok else 'FAIL'}  {spec.name:<16} {row.message}")
    print(f"{len(registry) - failed} PASS, {failed} FAIL")
    return EXIT_VALIDATION if failed else EXIT_OK


def cmd_data_fetch(args) -> int:
    data_dir = resolve_data_dir(args.data_dir)
    registry = registry_for(data_dir)
    for spec in registry.values():
        print(f"{spec.name}: {', '.join(spec.file_names)}")
        for url in spec.source_urls:
            print(f"  {url}")
        if spec.notes:
            print(f"  note: {spec.notes}")
        if not args.download:
            continue
        for url in spec.source_urls:
            name = url.rsplit("/", 1)[-1]
            if name not in spec.file_names:
                print(f"  skip {name}: needs manual extraction (see note)")
                continue
            target = data_dir / name
            if target.exists():
                print(f"  have {target}")
                continue
            data_dir.mkdir(parents=True, exist_ok=True)
            try:
                urllib.request.urlretrieve(url, target)
            except OSError as exc:
                print(f"  FAILED {url}: {exc}")
            else:
                print(f"  saved {target}")
    print("run `kanbench data validate` to check the files")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = effective_config(args)
    print("effective config:", json.dumps(cfg, sort_keys=True))
    print(f"kernel backend: {kernels.BACKEND}")
    data_dir = cfg["data_dir"]
    registry = registry_for(data_dir)
    names = cfg["datasets"] or list(registry)
    unknown = [n for n in names if n not in registry]
    if unknown:
        raise UsageFailure(f"unknown datasets {unknown}; known: {list(registry)}")
    bad_models = [m for m in cfg["models"] if m not in MODELS]
    if bad_models:
        raise UsageFailure(f"unknown models {bad_models}; known: {list(MODELS)}")

    hyper = {k: cfg[k] for k in HYPER_FIELDS}
    specs, configs = {}, []
    for name in names:
        spec = registry[name]
        row = validate_dataset(spec, data_dir)
        if not row.ok:
            print(f"FAIL  {name}: {row.message}", file=sys.stderr)
            return EXIT_VALIDATION
        # The encoded input width (after one-hot) fixes the parameter counts.
        n_features = preprocess(load_csv(spec, data_dir), spec, cfg["seeds"][0]).n_features
        try:
            configs += generate_grid(spec, n_features, seeds=cfg["seeds"], models=cfg["models"],
                                     width_indices=cfg["width_indices"], **hyper)
        except ConfigurationError as exc:
            print(f"configuration error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        specs[name] = spec

    store = ResultsStore(cfg["output_dir"])
    todo = pending(configs, store.keys(), cfg["force"])
    print(f"{len(configs)} configs, {len(todo)} to run")
    results = run_configs(todo, specs, data_dir, workers=cfg["workers"],
                          overrides=overrides_of(cfg), on_result=store.append)
    write_report(cfg["output_dir"])
    failed = [r for r in results if not r.ok]
    print(f"{len(results)} new runs, {len(failed)} failed; report in {Path(cfg['output_dir']) / 'report'}")
    for r in failed:
        print(f"  failed: {r.config.key}: {r.error}", file=sys.stderr)
    return EXIT_RUN if failed else EXIT_OK


def cmd_report(args) -> int:
    store = ResultsStore(args.results_dir)
    results, problems = store.load()
    for msg in problems:
        print(f"warning: {store.path}: {msg}", file=sys.stderr)
    if not results:
        raise UsageFailure(f"no result records in {store.path}")
    report = write_report(args.results_dir, results)
    print(f"{len(results)} records, {len(report.datasets)} datasets; "
          f"report in {Path(args.results_dir) / 'report'}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    rows = run_suite(seed=args.seed, trials=args.trials)
    for row in rows:
        print(f"{'PASS' if row.ok else 'FAIL'}  {row.op:<24} max rel err {row.max_rel_error:.3e}")
    bad = [r for r in rows if not r.ok]
    print(f"{len(rows) - len(bad)}/{len(rows)} ops within {TOLERANCE:g}")
    return EXIT_GRADCHECK if bad else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kanbench", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    data = sub.add_parser("data", help="dataset files")
    data_sub = data.add_subparsers(dest="data_command", required=True)
    validate = data_sub.add_parser("validate", help="check row/column counts against the manifest")
    validate.add_argument("--data-dir")
    validate.set_defaults(func=cmd_data_validate)
    fetch = data_sub.add_parser("fetch", help="print (and optionally download) UCI source URLs")
    fetch.add_argument("--data-dir")
    fetch.add_argument("--download", action="store_true")
    fetch.set_defaults(func=cmd_data_fetch)

    bench = sub.add_parser("bench", help="run the parameter-matched sweep")
    bench.add_argument("--config", help="JSON file with any of the settings below")
    bench.add_argument("--data-dir", dest="data_dir")
    bench.add_argument("--output-dir", dest="output_dir")
    bench.add_argument("--datasets", type=_csv_list())
    bench.add_argument("--models", type=_csv_list())
    bench.add_argument("--seeds", type=_csv_list(int))
    bench.add_argument("--width-indices", dest="width_indices", type=_csv_list(int))
    bench.add_argument("--workers", type=int)
    bench.add_argument("--force", action="store_true", help="rerun configs already in the store")
    for name in HYPER_FIELDS:
        kind = type(DEFAULTS[name])
        bench.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind)
    bench.set_defaults(func=cmd_bench)

    report = sub.add_parser("report", help="regenerate report files from results.jsonl")
    report.add_argument("results_dir")
    report.set_defaults(func=cmd_report)

    grad = sub.add_parser("gradcheck", help="finite-difference check of every differentiable op")
    grad.add_argument("--seed", type=int, default=0)
    grad.add_argument("--trials", type=int, default=5)
    grad.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
