"""Execute a list of RunConfigs, optionally across worker processes.

Workers prepare (dataset, seed) splits themselves and cache them; the parent
process is the only writer of the results store. Each run is single-threaded.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from functools import lru_cache
from typing import Callable, Iterable, Sequence

from .bench import RunConfig, RunResult, execute_run
from .data import DatasetSpec, PreparedDataset, load_csv, preprocess

log = logging.getLogger(__name__)

_SPECS: dict[str, DatasetSpec] = {}
_DATA_DIR: str | None = None


def _init_worker(specs: dict[str, DatasetSpec], data_dir: str) -> None:
    global _SPECS, _DATA_DIR
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")
    _SPECS, _DATA_DIR = specs, data_dir
    _prepared.cache_clear()
    _raw.cache_clear()


@lru_cache(maxsize=4)
def _raw(name: str):
    return load_csv(_SPECS[name], _DATA_DIR)


@lru_cache(maxsize=8)
def _prepared(name: str, seed: int) -> PreparedDataset:
    return preprocess(_raw(name), _SPECS[name], seed)


def _run_one(config: RunConfig, overrides: dict) -> RunResult:
    return execute_run(config, _prepared(config.dataset, config.seed), overrides)


def run_configs(configs: Sequence[RunConfig], specs: dict[str, DatasetSpec], data_dir: str,
                workers: int = 1, overrides: dict | None = None,
                on_result: Callable[[RunResult], None] | None = None) -> list[RunResult]:
    overrides = dict(overrides or {})
    results = []

    def _emit(result: RunResult) -> None:
        results.append(result)
        if on_result is not None:
            on_result(result)
        status = "ok" if result.ok else f"FAILED ({result.error})"
        acc = f" acc={result.metrics.accuracy:.2f}" if result.metrics else ""
        log.info("[%d/%d] %s %s%s", len(results), len(configs), result.config.key, status, acc)

    if workers <= 1:
        _init_worker(specs, str(data_dir))
        for cfg in configs:
            _emit(_run_one(cfg, overrides))
        return results

    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(specs, str(data_dir))) as pool:
        futures = [pool.submit(_run_one, cfg, overrides) for cfg in configs]
        for fut in as_completed(futures):
            _emit(fut.result())
    return results


def pending(configs: Iterable[RunConfig], done_keys: set[str], force: bool = False) -> list[RunConfig]:
    return [c for c in configs if force or c.key not in done_keys]
