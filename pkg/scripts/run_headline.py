#!/usr/bin/env python3
"""Run the headline single-configuration experiment (configs/table2.json)."""

import sys
from pathlib import Path

from parity_kernels.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    extra = sys.argv[1:]
    sys.exit(main(["-v", "run", "--config", str(ROOT / "configs" / "table2.json"),
                   "--out", "runs/table2", *extra]))
