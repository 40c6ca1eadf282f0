"""Command-line front end.

    srgan sweep    --out runs/desk [--config sweep.cfg] [--preset desk|paper] [--workers N]
    srgan variants --out runs/variants [--preset desk|paper]
    srgan train    --method srgan --labeled 50 --seed 0 --out runs/one
    srgan report   --in runs/desk

A sweep config file is either a JSON object or plain-text `key=value` lines
(`#` comments allowed). Keys mirror SweepConfig: `methods` (comma-separated),
`labeled_sizes` (comma-separated ints), `n_unlabeled`, `n_test`, `n_seeds`;
training keys land on the base TrainConfig: `variant`, `steps`,
`batch_labeled`, `batch_unlabeled`, `batch_fake`, `learning_rate_d`,
`learning_rate_g`, `penalty_weight`, `noise_dim`, `eval_interval`. Values in
the file override the chosen preset. Exit status is 0 only when every
requested trial completed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dataset import build_bundle
from .harness import (
    PRESETS,
    SweepConfig,
    aggregate,
    emit_plot_data,
    load_results,
    loss_variant_study,
    render_report,
    results_to_csv,
    run_sweep,
    run_trial,
    variant_means,
    write_results,
)
from .losses import LossVariant
from .training import Method

_SWEEP_INT_KEYS = {"n_unlabeled", "n_test", "n_seeds"}
_BASE_INT_KEYS = {
    "steps",
    "batch_labeled",
    "batch_unlabeled",
    "batch_fake",
    "noise_dim",
    "eval_interval",
}
_BASE_FLOAT_KEYS = {"learning_rate_d", "learning_rate_g", "penalty_weight"}


def _parse_config_text(text: str) -> dict:
    """Accept a JSON object or key=value lines."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        obj = json.loads(text)
        if not isinstance(obj, dict):
            raise ValueError("config JSON must be an object")
        flat = dict(obj)
        base = flat.pop("base", {})
        if not isinstance(base, dict):
            raise ValueError("config key 'base' must be an object")
        flat.update(base)
        return flat
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _as_list(value) -> list:
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def apply_config(cfg: SweepConfig, values: dict) -> SweepConfig:
    """Overlay parsed config-file values onto a preset SweepConfig."""
    sweep_kwargs = {}
    base_kwargs = {}
    for key, value in values.items():
        if key == "methods":
            sweep_kwargs["methods"] = tuple(Method.parse(str(m)) for m in _as_list(value))
        elif key == "labeled_sizes":
            sweep_kwargs["labeled_sizes"] = tuple(int(s) for s in _as_list(value))
        elif key == "out_dir":
            sweep_kwargs["out_dir"] = str(value)
        elif key in _SWEEP_INT_KEYS:
            sweep_kwargs[key] = int(value)
        elif key == "variant":
            base_kwargs["variant"] = LossVariant.parse(str(value))
        elif key == "method":
            base_kwargs["method"] = Method.parse(str(value))
        elif key in _BASE_INT_KEYS:
            base_kwargs[key] = int(value)
        elif key in _BASE_FLOAT_KEYS:
            base_kwargs[key] = float(value)
        else:
            raise ValueError(f"unknown config key {key!r}")
    if base_kwargs:
        sweep_kwargs["base"] = cfg.base.with_(**base_kwargs)
    return cfg.with_(**sweep_kwargs) if sweep_kwargs else cfg


def load_sweep_config(path, preset: str = "desk") -> SweepConfig:
    cfg = PRESETS[preset]()
    if path is None:
        return cfg
    return apply_config(cfg, _parse_config_text(Path(path).read_text()))


def _cmd_sweep(args) -> int:
    cfg = load_sweep_config(args.config, args.preset)
    cfg = cfg.with_(out_dir=args.out)

    def progress(row):
        print(
            f"[{row.status}] {row.method} labeled={row.labeled_size} seed={row.seed} "
            f"mae={row.test_mae:.4f} ({row.wall_time:.1f}s)",
            flush=True,
        )

    results = run_sweep(cfg, workers=args.workers, progress=progress)
    stats, ratios = aggregate(results)
    emit_plot_data(stats, ratios, Path(args.out) / "plots")
    print(render_report(stats, ratios), end="")
    failed = [r for r in results if r.status != "ok"]
    if failed:
        print(f"{len(failed)} trial(s) failed", file=sys.stderr)
        return 1
    return 0


def _cmd_variants(args) -> int:
    preset = PRESETS[args.preset]()
    results = loss_variant_study(
        preset.base,
        n_labeled=500,
        n_unlabeled=preset.n_unlabeled,
        n_test=preset.n_test,
        n_seeds=preset.n_seeds,
        out_dir=args.out,
    )
    print("variant  mean_mae")
    for variant, mean in variant_means(results).items():
        print(f"{variant:<7s}  {mean:.6f}")
    if any(r.status != "ok" for r in results):
        print("some variant trials failed", file=sys.stderr)
        return 1
    return 0


def _cmd_train(args) -> int:
    preset = PRESETS[args.preset]()
    base = preset.base
    if args.steps is not None:
        base = base.with_(steps=args.steps)
    if args.variant is not None:
        base = base.with_(variant=LossVariant.parse(args.variant))
    method = Method.parse(args.method)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle = build_bundle(
        seed=args.seed,
        n_labeled=args.labeled,
        n_unlabeled=preset.n_unlabeled,
        n_test=preset.n_test,
    )
    result = run_trial(method, args.labeled, args.seed, bundle, base, out_dir)
    existing = {r.key: r for r in load_results(out_dir / "results.csv")}
    existing[result.key] = result
    write_results(out_dir / "results.csv", existing.values())
    if result.status != "ok":
        print(f"training failed: {result.error}", file=sys.stderr)
        return 1
    print(
        f"{result.method} labeled={result.labeled_size} seed={result.seed} "
        f"test_mae={result.test_mae:.6f} ({result.wall_time:.1f}s)"
    )
    return 0


def _cmd_report(args) -> int:
    results = load_results(Path(args.in_dir) / "results.csv")
    if not results:
        print(f"no results found under {args.in_dir}", file=sys.stderr)
        return 1
    stats, ratios = aggregate(results)
    print(render_report(stats, ratios), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srgan",
        description="semi-supervised regression GAN benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="train methods x sizes x seeds, aggregate")
    sweep.add_argument("--config", default=None, help="JSON or key=value overrides")
    sweep.add_argument("--out", required=True, help="output directory")
    sweep.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    sweep.add_argument(
        "--workers",
        type=int,
        default=None,
        help="worker processes (default: all cores)",
    )
    sweep.set_defaults(func=_cmd_sweep)

    variants = sub.add_parser("variants", help="loss-variant comparison at 500 labels")
    variants.add_argument("--out", required=True)
    variants.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    variants.set_defaults(func=_cmd_variants)

    train_cmd = sub.add_parser("train", help="train a single trial")
    train_cmd.add_argument("--method", default="srgan")
    train_cmd.add_argument("--labeled", type=int, default=50)
    train_cmd.add_argument("--seed", type=int, default=0)
    train_cmd.add_argument("--out", required=True)
    train_cmd.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    train_cmd.add_argument("--steps", type=int, default=None)
    train_cmd.add_argument("--variant", default=None)
    train_cmd.set_defaults(func=_cmd_train)

    report = sub.add_parser("report", help="print aggregate tables for a run dir")
    report.add_argument("--in", dest="in_dir", required=True)
    report.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
