"""Run every experiment with its archived config and print one line per experiment.

    python scripts/run_all.py --out results [--only cf-bound fdd-converge] [--threads 1]
"""
import argparse
import json
import sys
from pathlib import Path

from roughkac.cli import main as cli_main
from roughkac.experiments import EXPERIMENTS

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--only", nargs="*", choices=EXPERIMENTS)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()
    status = 0
    for name in args.only or EXPERIMENTS:
        code = cli_main([name, "--config", str(CONFIGS / f"{name}.yaml"), "--out", str(args.out),
                         "--threads", str(args.threads)])
        summary = args.out / name / "summary.json"
        wall = json.loads(summary.read_text())["wall_time"] if summary.exists() else float("nan")
        print(f"== {name}: {'pass' if code == 0 else 'FAIL'} ({wall:.1f}s)", flush=True)
        status |= code
    return status


if __name__ == "__main__":
    sys.exit(main())
