"""Print the fdd distances and Holder tails from a finished fdd-converge run.

    python scripts/convergence_table.py results/fdd-converge
"""
import sys
from pathlib import Path

from roughkac.io import read_csv


def main(folder):
    folder = Path(folder)
    rows = read_csv(folder / "fdd.csv")
    print(f"{'eps':>6} {'(X, X2) vs (B, B2)':>20} {'y^eps vs y':>12}")
    for r in rows:
        print(f"{float(r['eps']):6.3f} {float(r['fdd_path_area']):20.4f} {float(r['fdd_solution']):12.4f}")
    print()
    print(f"{'source':>10} {'A':>8} {'P[norm > A]':>12} {'stderr':>8}")
    for r in read_csv(folder / "tails.csv"):
        print(f"{r['source']:>10} {float(r['A']):8.3f} {float(r['prob']):12.4f} {float(r['stderr']):8.4f}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "results/fdd-converge")
