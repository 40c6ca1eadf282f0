#!/usr/bin/env python3
"""Desk-scale benchmark sweep: dnn/srgan/dggan x {50,100,500,1000} labels x 3 seeds.

Takes roughly half an hour on one core; rerunning resumes from results.csv.
Expected picture at 50 labels: srgan clearly below dnn (ratio ~0.7), dggan
in between.
"""

import sys

from srgan.cli import main

OUT = sys.argv[1] if len(sys.argv) > 1 else "runs/desk"

if __name__ == "__main__":
    sys.exit(main(["sweep", "--preset", "desk", "--out", OUT]))
