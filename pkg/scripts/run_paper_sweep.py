#!/usr/bin/env python3
"""Full-scale sweep: all methods, sizes 50..10,000, 50,000 unlabeled, 3 seeds.

This is the hours-long profile (100k steps per trial). The interesting
endpoint is the 10,000-label cell, where srgan stops beating dnn (error
ratio ~1.0-1.25). Pass a custom output dir as argv[1]; resume is automatic.

To run just the large-label cell:

    python scripts/run_paper_sweep.py runs/paper-10k --only-largest
"""

import sys

from srgan.cli import main
from srgan.harness import paper_preset
from srgan.harness import run_sweep, aggregate, render_report, emit_plot_data
from pathlib import Path

OUT = sys.argv[1] if len(sys.argv) > 1 else "runs/paper"

if __name__ == "__main__":
    if "--only-largest" in sys.argv:
        cfg = paper_preset()
        cfg = cfg.with_(labeled_sizes=cfg.labeled_sizes[-1:], out_dir=OUT)
        results = run_sweep(cfg, progress=lambda r: print(
            f"[{r.status}] {r.method} labeled={r.labeled_size} seed={r.seed} "
            f"mae={r.test_mae:.4f}", flush=True))
        stats, ratios = aggregate(results)
        emit_plot_data(stats, ratios, Path(OUT) / "plots")
        print(render_report(stats, ratios), end="")
        sys.exit(0 if all(r.status == "ok" for r in results) else 1)
    sys.exit(main(["sweep", "--preset", "paper", "--out", OUT]))
