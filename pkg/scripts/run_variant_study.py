#!/usr/bin/env python3
"""Compare the three fake-contrast shapes (log / sqrt / linear) at 500 labels.

Uses the desk preset (5,000 unlabeled, 3 seeds). The expected ordering is
log <= sqrt <= linear in mean test MAE; linear is noticeably unstable at
this scale.
"""

import sys

from srgan.cli import main

OUT = sys.argv[1] if len(sys.argv) > 1 else "runs/variants"

if __name__ == "__main__":
    sys.exit(main(["variants", "--preset", "desk", "--out", OUT]))
