"""Shared helper: run one CLI subcommand into results/<name>/."""

import sys
from pathlib import Path

from dtolab.cli import main

ROOT = Path(__file__).resolve().parent.parent


def run(name: str, argv: list[str]) -> int:
    out = ROOT / "results" / name
    code = main(argv + ["--out", str(out)] + sys.argv[1:])
    print(f"{name}: exit {code}, outputs in {out}")
    return code
