"""Experiment sweeps over methods × labeled-set sizes × seeds.

A sweep cell is one (labeled_size, seed) pair; every requested method trains
on the same bundle built from that seed, so method comparisons always see
identical data. Results stream to `results.csv` after every trial and a
rerun skips rows that are already present, which makes sweeps crash-resumable
and idempotent. All writes go through a temp-file-and-rename so a killed run
never leaves a half-written file behind.
"""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .dataset import DatasetBundle, build_bundle
from .losses import LossVariant
from .models import save_checkpoint
from .training import Method, TrainConfig, TrainingDiverged, train

DESK_SIZES = (50, 100, 500, 1000)
PAPER_SIZES = (50, 100, 500, 1000, 5000, 10000)


@dataclass(frozen=True)
class SweepConfig:
    methods: tuple[Method, ...] = (Method.DNN, Method.SRGAN, Method.DGGAN)
    labeled_sizes: tuple[int, ...] = PAPER_SIZES
    n_unlabeled: int = 50_000
    n_test: int = 1_000
    n_seeds: int = 3
    base: TrainConfig = field(default_factory=TrainConfig)
    out_dir: str = "runs"

    def __post_init__(self):
        if not self.methods:
            raise ValueError("at least one method required")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("duplicate methods")
        if not self.labeled_sizes or any(s < 1 for s in self.labeled_sizes):
            raise ValueError("labeled sizes must be positive")
        if list(self.labeled_sizes) != sorted(self.labeled_sizes):
            raise ValueError("labeled sizes must be ascending")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")
        if self.n_unlabeled < 1 or self.n_test < 1:
            raise ValueError("pool sizes must be >= 1")

    def with_(self, **kwargs) -> "SweepConfig":
        return replace(self, **kwargs)


def desk_preset() -> SweepConfig:
    """Minutes-scale profile: smaller unlabeled pool and fewer steps, tuned so
    the low-label advantage and the variant ordering reproduce on one core."""
    return SweepConfig(
        labeled_sizes=DESK_SIZES,
        n_unlabeled=5_000,
        n_test=1_000,
        n_seeds=3,
        base=TrainConfig(
            steps=10_000,
            batch_labeled=128,
            batch_unlabeled=128,
            batch_fake=128,
            learning_rate_d=1e-3,
            learning_rate_g=3e-5,
            penalty_weight=10.0,
            eval_interval=1_000,
        ),
    )


def paper_preset() -> SweepConfig:
    """Full-scale profile: 50,000 unlabeled examples, the complete size grid,
    and a longer step budget; hours, not minutes.

    Calibrated for stability at the large-label end: a big labeled batch
    anchors the regression head, a slow discriminator limits feature drift,
    and a near-frozen generator keeps the adversarial terms from budgeting
    away the supervised signal over the 60k-step horizon. Longer horizons
    and every faster/looser setting tried were strictly worse at 10,000
    labels (see the adversarial-vs-supervised MAE ratio in the benchmark
    notes in README.md).
    """
    return SweepConfig(
        labeled_sizes=PAPER_SIZES,
        n_unlabeled=50_000,
        n_test=1_000,
        n_seeds=3,
        base=TrainConfig(
            steps=60_000,
            batch_labeled=512,
            batch_unlabeled=128,
            batch_fake=128,
            learning_rate_d=3e-4,
            learning_rate_g=1e-7,
            penalty_weight=10.0,
            eval_interval=1_000,
        ),
    )


PRESETS = {"desk": desk_preset, "paper": paper_preset}


@dataclass(frozen=True)
class ExperimentResult:
    method: str
    labeled_size: int
    seed: int
    status: str  # "ok" | "failed"
    test_mae: float  # NaN for failed rows
    wall_time: float
    bundle_checksum: str
    history_path: str
    error: str = ""

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.method, self.labeled_size, self.seed)


_RESULT_COLUMNS = [
    "method",
    "labeled_size",
    "seed",
    "status",
    "test_mae",
    "wall_time",
    "bundle_checksum",
    "history_path",
    "error",
]


def _atomic_write(path: Path, data: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(data)
    os.replace(tmp, path)


def results_to_csv(results: Sequence[ExperimentResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_RESULT_COLUMNS)
    for r in sorted(results, key=lambda r: (r.labeled_size, r.seed, r.method)):
        writer.writerow(
            [
                r.method,
                r.labeled_size,
                r.seed,
                r.status,
                format(r.test_mae, ".17g"),
                format(r.wall_time, ".6f"),
                r.bundle_checksum,
                r.history_path,
                r.error,
            ]
        )
    return buf.getvalue()


def write_results(path, results: Iterable[ExperimentResult]) -> None:
    _atomic_write(Path(path), results_to_csv(list(results)))


def load_results(path) -> list[ExperimentResult]:
    path = Path(path)
    if not path.exists():
        return []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != _RESULT_COLUMNS:
            raise ValueError(f"{path}: unexpected results header {reader.fieldnames}")
        return [
            ExperimentResult(
                method=row["method"],
                labeled_size=int(row["labeled_size"]),
                seed=int(row["seed"]),
                status=row["status"],
                test_mae=float(row["test_mae"]),
                wall_time=float(row["wall_time"]),
                bundle_checksum=row["bundle_checksum"],
                history_path=row["history_path"],
                error=row["error"],
            )
            for row in reader
        ]


def run_trial(
    method: Method,
    labeled_size: int,
    seed: int,
    bundle: DatasetBundle,
    base: TrainConfig,
    out_dir: Path,
) -> ExperimentResult:
    """Train one (method, size, seed) trial and persist its artifacts."""
    cfg = base.with_(method=method, seed=seed)
    stem = f"{method.value}_{labeled_size}_{seed}"
    start = time.perf_counter()
    try:
        model, _, history = train(cfg, bundle)
    except TrainingDiverged as diverged:
        return ExperimentResult(
            method=method.value,
            labeled_size=labeled_size,
            seed=seed,
            status="failed",
            test_mae=float("nan"),
            wall_time=time.perf_counter() - start,
            bundle_checksum=bundle.checksum(),
            history_path="",
            error=str(diverged),
        )
    history_path = out_dir / f"history_{stem}.csv"
    _atomic_write(history_path, history.to_csv())
    save_checkpoint(model, out_dir / f"model_{stem}.bin", seed=seed, step=cfg.steps)
    return ExperimentResult(
        method=method.value,
        labeled_size=labeled_size,
        seed=seed,
        status="ok",
        test_mae=history.final_test_mae,
        wall_time=time.perf_counter() - start,
        bundle_checksum=bundle.checksum(),
        history_path=history_path.name,
    )


def _run_cell(args) -> list[ExperimentResult]:
    cfg, labeled_size, seed, missing_methods, out_dir = args
    bundle = build_bundle(
        seed=seed,
        n_labeled=labeled_size,
        n_unlabeled=cfg.n_unlabeled,
        n_test=cfg.n_test,
    )
    return [
        run_trial(m, labeled_size, seed, bundle, cfg.base, Path(out_dir))
        for m in cfg.methods
        if m.value in missing_methods
    ]


def run_sweep(
    cfg: SweepConfig,
    workers: int | None = 1,
    progress=None,
) -> list[ExperimentResult]:
    """Train every (method, size, seed) cell, resuming over completed rows.

    Work is partitioned by (size, seed) so all methods in a cell share one
    bundle. Rows land in results.csv as soon as each cell finishes; the
    returned list covers the full requested grid (existing rows included).
    `workers=None` uses one process per available core; results are identical
    for any worker count.
    """
    if workers is None:
        workers = os.cpu_count() or 1
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "results.csv"
    done = {r.key: r for r in load_results(results_path)}

    cells = []
    for labeled_size in cfg.labeled_sizes:
        for seed in range(cfg.n_seeds):
            missing = [
                m.value
                for m in cfg.methods
                if (m.value, labeled_size, seed) not in done
            ]
            if missing:
                cells.append((cfg, labeled_size, seed, tuple(missing), str(out_dir)))

    def record(new_rows: Iterable[ExperimentResult]) -> None:
        for row in new_rows:
            done[row.key] = row
        write_results(results_path, done.values())
        if progress is not None:
            for row in new_rows:
                progress(row)

    if workers <= 1 or not cells:
        for cell in cells:
            record(_run_cell(cell))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rows in pool.map(_run_cell, cells):
                record(rows)

    wanted = [
        (m.value, size, seed)
        for size in cfg.labeled_sizes
        for seed in range(cfg.n_seeds)
        for m in cfg.methods
    ]
    return [done[k] for k in wanted]


# --- aggregation ---------------------------------------------------------------


@dataclass(frozen=True)
class CellStats:
    method: str
    labeled_size: int
    mean_mae: float
    seeds: tuple[int, ...]
    maes: tuple[float, ...]


@dataclass(frozen=True)
class RatioStats:
    method: str
    labeled_size: int
    ratio: float  # mean MAE of method / mean MAE of the plain supervised baseline


def aggregate(
    results: Sequence[ExperimentResult],
    baseline: str = Method.DNN.value,
) -> tuple[list[CellStats], list[RatioStats]]:
    """Seed-mean MAE per (method, size), plus per-size error ratios against
    the baseline method. Failed rows are excluded; a ratio whose baseline
    cell is missing raises."""
    cells: dict[tuple[str, int], list[ExperimentResult]] = {}
    for r in results:
        if r.status == "ok":
            cells.setdefault((r.method, r.labeled_size), []).append(r)

    stats = []
    for (method, size), rows in sorted(cells.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        rows = sorted(rows, key=lambda r: r.seed)
        stats.append(
            CellStats(
                method=method,
                labeled_size=size,
                mean_mae=sum(r.test_mae for r in rows) / len(rows),
                seeds=tuple(r.seed for r in rows),
                maes=tuple(r.test_mae for r in rows),
            )
        )

    by_key = {(s.method, s.labeled_size): s for s in stats}
    ratios = []
    has_baseline = any(s.method == baseline for s in stats)
    for s in stats:
        if s.method == baseline or not has_baseline:
            continue
        base = by_key.get((baseline, s.labeled_size))
        if base is None:
            raise ValueError(
                f"no {baseline} baseline cell at {s.labeled_size} labels for a ratio"
            )
        ratios.append(RatioStats(s.method, s.labeled_size, s.mean_mae / base.mean_mae))
    return stats, ratios


# --- loss-variant study ----------------------------------------------------------


@dataclass(frozen=True)
class VariantResult:
    variant: str
    seed: int
    status: str
    test_mae: float


def loss_variant_study(
    base: TrainConfig,
    variants: Sequence[LossVariant] = tuple(LossVariant),
    n_labeled: int = 500,
    n_unlabeled: int = 5_000,
    n_test: int = 1_000,
    n_seeds: int = 3,
    out_dir=None,
) -> list[VariantResult]:
    """Train the feature-statistic method once per (variant, seed) on shared
    bundles and report per-variant MAEs."""
    results: list[VariantResult] = []
    for seed in range(n_seeds):
        bundle = build_bundle(seed=seed, n_labeled=n_labeled, n_unlabeled=n_unlabeled, n_test=n_test)
        for variant in variants:
            cfg = base.with_(method=Method.SRGAN, variant=variant, seed=seed)
            try:
                _, _, history = train(cfg, bundle)
                results.append(VariantResult(variant.value, seed, "ok", history.final_test_mae))
            except TrainingDiverged:
                results.append(VariantResult(variant.value, seed, "failed", float("nan")))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _atomic_write(out_dir / "variants.csv", variant_results_to_csv(results))
    return results


def variant_results_to_csv(results: Sequence[VariantResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["variant", "seed", "status", "test_mae"])
    for r in results:
        writer.writerow([r.variant, r.seed, r.status, format(r.test_mae, ".17g")])
    return buf.getvalue()


def variant_means(results: Sequence[VariantResult]) -> dict[str, float]:
    groups: dict[str, list[float]] = {}
    for r in results:
        if r.status == "ok":
            groups.setdefault(r.variant, []).append(r.test_mae)
    return {v: sum(ms) / len(ms) for v, ms in groups.items()}


# --- plot-data emission ----------------------------------------------------------


def emit_plot_data(
    stats: Sequence[CellStats], ratios: Sequence[RatioStats], out_dir
) -> list[Path]:
    """One CSV per figure: seed-mean MAE by size/method, and error ratios.
    Byte-deterministic for identical inputs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    max_seeds = max((len(s.maes) for s in stats), default=0)

    mae_buf = io.StringIO()
    writer = csv.writer(mae_buf, lineterminator="\n")
    writer.writerow(
        ["labeled_size", "method", "mean_mae"] + [f"seed_{i}_mae" for i in range(max_seeds)]
    )
    for s in sorted(stats, key=lambda s: (s.labeled_size, s.method)):
        row = [s.labeled_size, s.method, format(s.mean_mae, ".17g")]
        by_seed = dict(zip(s.seeds, s.maes))
        row += [
            format(by_seed[i], ".17g") if i in by_seed else "" for i in range(max_seeds)
        ]
        writer.writerow(row)

    ratio_buf = io.StringIO()
    writer = csv.writer(ratio_buf, lineterminator="\n")
    writer.writerow(["labeled_size", "method", "error_ratio"])
    for r in sorted(ratios, key=lambda r: (r.labeled_size, r.method)):
        writer.writerow([r.labeled_size, r.method, format(r.ratio, ".17g")])

    mae_path = out_dir / "mae_by_size.csv"
    ratio_path = out_dir / "error_ratio_by_size.csv"
    _atomic_write(mae_path, mae_buf.getvalue())
    _atomic_write(ratio_path, ratio_buf.getvalue())
    return [mae_path, ratio_path]


def render_report(stats: Sequence[CellStats], ratios: Sequence[RatioStats]) -> str:
    """Console tables for the report command."""
    lines = ["mean test MAE (seeds)", "labeled_size  method  mean_mae  n_seeds"]
    for s in sorted(stats, key=lambda s: (s.labeled_size, s.method)):
        lines.append(f"{s.labeled_size:>12d}  {s.method:<6s}  {s.mean_mae:.6f}  {len(s.maes)}")
    if ratios:
        lines += ["", "error ratio vs baseline", "labeled_size  method  ratio"]
        for r in sorted(ratios, key=lambda r: (r.labeled_size, r.method)):
            lines.append(f"{r.labeled_size:>12d}  {r.method:<6s}  {r.ratio:.6f}")
    return "\n".join(lines) + "\n"
