#!/usr/bin/env python3
"""Run the parity-complexity sweep (configs/table1.json); resumable on rerun."""

import sys
from pathlib import Path

from parity_kernels.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    extra = sys.argv[1:]
    sys.exit(main(["-v", "sweep", "--config", str(ROOT / "configs" / "table1.json"),
                   "--out", "runs/table1", *extra]))
