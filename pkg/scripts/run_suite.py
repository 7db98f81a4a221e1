"""Run every config in a directory through the CLI runner and print a summary.

    python3 scripts/run_suite.py [configs] [--jobs 4]
"""
import sys
from pathlib import Path

from opseq.cli import main

if __name__ == "__main__":
    args = sys.argv[1:]
    if not args or args[0].startswith("-"):
        args = [str(Path(__file__).resolve().parent.parent / "configs")] + args
    sys.exit(main(["suite"] + args))
