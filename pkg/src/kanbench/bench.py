"""Parameter-matched sweep: grid generation, training runs, aggregation.

Width index ``i`` in 1..10 maps to a KAN hidden width of ``i`` and an MLP
hidden width of ``10 * i`` (both scaled by the dataset's ``width_scale``,
10 for Poker). Best rows are chosen per (dataset, model) by mean test
accuracy over seeds; all other metrics are reported for that same width.
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .autodiff import Tensor, backward, no_grad, softmax_cross_entropy
from .data import DatasetSpec, PreparedDataset, batches
from .flops import DEFAULT_CONVENTION, FlopReport, kan_flops, mlp_flops
from .kan import SplineGrid, kan_init, kan_param_count
from .metrics import MetricsRecord, Summary, aggregate, compute_metrics, confusion, mean_std, predict
from .mlp import mlp_init, mlp_param_count
from .optim import AdamW, LrSchedule, NonFiniteError, lr_at

log = logging.getLogger(__name__)

MODELS = ("KAN", "MLP")
WIDTH_INDICES = tuple(range(1, 11))
SEEDS = (0, 1, 2, 3, 4)
MLP_WIDTH_FACTOR = 10
PARITY_TOLERANCE = 0.25
SPLIT_POLICY = "stratified-80/20-per-seed"


class ConfigurationError(ValueError):
    """A generated configuration violates parameter parity or is malformed."""


@dataclass(frozen=True)
class RunConfig:
    dataset: str
    model: str
    width_index: int
    hidden: int
    seed: int
    epochs: int = 10
    batch_size: int = 256
    lr: float = 1e-2
    gamma: float = 0.8
    weight_decay: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grid_size: int = 5
    spline_order: int = 3
    domain_lo: float = -1.0
    domain_hi: float = 1.0
    split_policy: str = SPLIT_POLICY

    @property
    def key(self) -> str:
        return (f"{self.dataset}/{self.model}/i{self.width_index:02d}/h{self.hidden}/s{self.seed}"
                f"/{self.fingerprint}")

    @property
    def fingerprint(self) -> str:
        """Short hash of the training hyperparameters (everything but the job identity)."""
        hyper = {k: v for k, v in asdict(self).items()
                 if k not in ("dataset", "model", "width_index", "hidden", "seed")}
        return hashlib.sha1(json.dumps(hyper, sort_keys=True).encode()).hexdigest()[:10]

    @property
    def grid(self) -> SplineGrid:
        return SplineGrid(self.domain_lo, self.domain_hi, self.grid_size, self.spline_order)

    def to_dict(self) -> dict:
        return asdict(self)


def hidden_width(model: str, width_index: int, width_scale: int = 1) -> int:
    if model == "KAN":
        return width_index * width_scale
    if model == "MLP":
        return MLP_WIDTH_FACTOR * width_index * width_scale
    raise ConfigurationError(f"unknown model kind {model!r}")


def param_count(model: str, d: int, hidden: int, c: int, grid: SplineGrid | None = None) -> int:
    if model == "KAN":
        return kan_param_count([d, hidden, c], grid)
    return mlp_param_count(d, hidden, c)


def parity_gap(d: int, c: int, width_index: int, width_scale: int = 1,
               grid: SplineGrid | None = None) -> tuple[int, int, float]:
    p_kan = kan_param_count([d, hidden_width("KAN", width_index, width_scale), c], grid)
    p_mlp = mlp_param_count(d, hidden_width("MLP", width_index, width_scale), c)
    return p_kan, p_mlp, abs(p_kan - p_mlp) / p_mlp


def generate_grid(spec: DatasetSpec, n_features: int | None = None, seeds: Sequence[int] = SEEDS,
                  models: Sequence[str] = MODELS, width_indices: Sequence[int] = WIDTH_INDICES,
                  **overrides) -> list[RunConfig]:
    """All (model, width, seed) configs for one dataset, parity-checked.

    ``n_features`` is the encoded input width (differs from the raw feature
    count when categoricals are one-hot encoded); defaults to the raw count.
    """
    d = n_features if n_features is not None else spec.expected_features
    c = spec.n_classes
    base = RunConfig(spec.name, "KAN", 1, 1, 0, **overrides)
    grid = base.grid
    for i in width_indices:
        p_kan, p_mlp, gap = parity_gap(d, c, i, spec.width_scale, grid)
        if gap > PARITY_TOLERANCE:
            raise ConfigurationError(
                f"{spec.name} width index {i}: KAN has {p_kan} parameters, MLP has {p_mlp} "
                f"(gap {gap:.1%} > {PARITY_TOLERANCE:.0%})")
    configs = []
    for model in models:
        for i in width_indices:
            for seed in seeds:
                configs.append(replace(base, model=model, width_index=i,
                                       hidden=hidden_width(model, i, spec.width_scale), seed=seed))
    return configs


def build_model(config: RunConfig, d: int, c: int):
    rng = np.random.default_rng([config.seed, 0])
    if config.model == "KAN":
        return kan_init([d, config.hidden, c], config.grid, rng)
    if config.model == "MLP":
        return mlp_init(d, config.hidden, c, rng)
    raise ConfigurationError(f"unknown model kind {config.model!r}")


def flop_report(config: RunConfig, d: int, c: int, n: int) -> FlopReport:
    if config.model == "KAN":
        return kan_flops([d, config.hidden, c], config.grid, n, DEFAULT_CONVENTION)
    return mlp_flops(d, config.hidden, c, n, DEFAULT_CONVENTION)


def environment_stamp() -> dict:
    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "kernel_backend": kernels.BACKEND,
    }


@dataclass
class RunResult:
    config: RunConfig
    status: str                       # "ok" | "failed"
    metrics: MetricsRecord | None
    epoch_seconds: list[float]
    train_seconds: float
    final_train_loss: float | None
    param_count: int
    flops: dict
    error: str | None = None
    environment: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def mean_epoch_seconds(self) -> float:
        return float(np.mean(self.epoch_seconds)) if self.epoch_seconds else 0.0

    def to_dict(self) -> dict:
        return {
            "key": self.config.key,
            "config": self.config.to_dict(),
            "status": self.status,
            "metrics": self.metrics.to_dict() if self.metrics else None,
            "epoch_seconds": self.epoch_seconds,
            "train_seconds": self.train_seconds,
            "final_train_loss": self.final_train_loss,
            "param_count": self.param_count,
            "flops": self.flops,
            "error": self.error,
            "environment": self.environment,
            "overrides": self.overrides,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunResult":
        return cls(
            config=RunConfig(**d["config"]),
            status=d["status"],
            metrics=MetricsRecord(**d["metrics"]) if d.get("metrics") else None,
            epoch_seconds=list(d.get("epoch_seconds", [])),
            train_seconds=float(d.get("train_seconds", 0.0)),
            final_train_loss=d.get("final_train_loss"),
            param_count=int(d["param_count"]),
            flops=d.get("flops", {}),
            error=d.get("error"),
            environment=d.get("environment", {}),
            overrides=d.get("overrides", {}),
        )


def _check_finite(params, where: str) -> None:
    for i, p in enumerate(params):
        if not p.is_finite():
            raise NonFiniteError(f"non-finite values in parameter {i} after {where}")


def train(model, prepared: PreparedDataset, config: RunConfig) -> tuple[list[float], float | None]:
    """Mini-batch AdamW with per-epoch LR decay; returns per-epoch seconds and last epoch's loss."""
    params = model.parameters()
    opt = AdamW(params, lr=config.lr, betas=(config.beta1, config.beta2), eps=config.eps,
                weight_decay=config.weight_decay)
    schedule = LrSchedule(config.lr, config.gamma)
    epoch_seconds: list[float] = []
    last_loss = None
    for epoch in range(config.epochs):
        lr = lr_at(schedule, epoch)
        total, seen = 0.0, 0
        start = time.perf_counter()
        for xb, yb in batches(prepared, config.batch_size, config.seed, epoch):
            opt.zero_grad()
            loss = softmax_cross_entropy(model(Tensor(xb)), yb)
            value = loss.item()
            if not np.isfinite(value):
                raise NonFiniteError(f"non-finite loss at epoch {epoch}")
            backward(loss)
            opt.step(lr)
            _check_finite(params, f"step {opt.state.step_count}")
            total += value * len(yb)
            seen += len(yb)
        epoch_seconds.append(time.perf_counter() - start)
        last_loss = total / seen if seen else None
    return epoch_seconds, last_loss


def evaluate(model, prepared: PreparedDataset) -> MetricsRecord:
    with no_grad():
        logits = model(Tensor(prepared.X_test)).data
    cm = confusion(prepared.y_test, predict(logits), prepared.n_classes)
    return compute_metrics(cm, prepared.spec.task, prepared.positive_index)


def execute_run(config: RunConfig, prepared: PreparedDataset, overrides: dict | None = None) -> RunResult:
    if prepared.spec.name != config.dataset:
        raise ConfigurationError(f"config is for {config.dataset!r}, data is {prepared.spec.name!r}")
    if prepared.split_seed != config.seed:
        raise ConfigurationError(
            f"split drawn with seed {prepared.split_seed}, config seed is {config.seed}")
    d, c = prepared.n_features, prepared.n_classes
    model = build_model(config, d, c)
    n_params = sum(p.data.size for p in model.parameters())
    flops = flop_report(config, d, c, prepared.X_test.shape[0]).to_dict()
    common = dict(param_count=n_params, flops=flops, environment=environment_stamp(),
                  overrides=dict(overrides or {}))
    try:
        epoch_seconds, last_loss = train(model, prepared, config)
    except NonFiniteError as exc:
        log.warning("%s failed: %s", config.key, exc)
        return RunResult(config, "failed", None, [], 0.0, None, error=str(exc), **common)
    metrics = evaluate(model, prepared)
    return RunResult(config, "ok", metrics, epoch_seconds, float(sum(epoch_seconds)), last_loss,
                     **common)


# ---------------------------------------------------------------- aggregation

@dataclass
class WidthRow:
    dataset: str
    model: str
    width_index: int
    hidden: int
    param_count: int
    mflops: float
    metrics: dict[str, Summary]
    train_seconds: Summary
    epoch_seconds: Summary
    n_ok: int
    n_failed: int


@dataclass
class BenchmarkReport:
    rows: list[WidthRow]
    best: dict[tuple[str, str], WidthRow]
    omitted: list[tuple[str, str, int]]
    failed_runs: int
    datasets: list[str]

    def accuracy_series(self, dataset: str, model: str) -> list[tuple[int, float, float]]:
        return [(r.param_count, r.metrics["accuracy"].mean, r.metrics["accuracy"].std)
                for r in self._rows_for(dataset, model)]

    def mflops_series(self, dataset: str, model: str) -> list[tuple[int, float]]:
        return [(r.param_count, r.mflops) for r in self._rows_for(dataset, model)]

    def _rows_for(self, dataset: str, model: str) -> list[WidthRow]:
        rows = [r for r in self.rows if r.dataset == dataset and r.model == model]
        return sorted(rows, key=lambda r: (r.param_count, r.width_index))


def aggregate_and_select(results: Iterable[RunResult]) -> BenchmarkReport:
    results = sorted(results, key=lambda r: r.config.key)
    groups: dict[tuple[str, str, int], list[RunResult]] = {}
    for r in results:
        groups.setdefault((r.config.dataset, r.config.model, r.config.width_index), []).append(r)
    rows, omitted = [], []
    failed = sum(1 for r in results if not r.ok)
    for (ds, model, wi), group in sorted(groups.items()):
        good = [r for r in group if r.ok]
        if not good:
            omitted.append((ds, model, wi))
            log.warning("%s %s width %d: all %d seeds failed; omitted", ds, model, wi, len(group))
            continue
        rows.append(WidthRow(
            dataset=ds, model=model, width_index=wi,
            hidden=good[0].config.hidden,
            param_count=good[0].param_count,
            mflops=float(good[0].flops.get("mflops", 0.0)),
            metrics=aggregate([r.metrics for r in good]),
            train_seconds=mean_std([r.train_seconds for r in good]),
            epoch_seconds=mean_std([r.mean_epoch_seconds for r in good]),
            n_ok=len(good), n_failed=len(group) - len(good),
        ))
    best: dict[tuple[str, str], WidthRow] = {}
    for row in rows:
        key = (row.dataset, row.model)
        cur = best.get(key)
        # strict > keeps the smaller width on ties (rows are in width order)
        if cur is None or row.metrics["accuracy"].mean > cur.metrics["accuracy"].mean:
            best[key] = row
    datasets = sorted({r.dataset for r in rows} | {o[0] for o in omitted})
    return BenchmarkReport(rows, best, omitted, failed, datasets)


def best_accuracy(report: BenchmarkReport, dataset: str, model: str) -> float:
    return report.best[(dataset, model)].metrics["accuracy"].mean


def results_from_jsonl(lines: Iterable[str]) -> tuple[list[RunResult], list[str]]:
    """Parse persisted records; returns (results, warnings for skipped lines)."""
    results, problems = [], []
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            results.append(RunResult.from_dict(json.loads(line)))
        except (ValueError, KeyError, TypeError) as exc:
            problems.append(f"line {lineno}: skipped corrupt record ({exc})")
    return results, problems
