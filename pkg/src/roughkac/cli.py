"""Command-line runner: ``roughkac <experiment> [--config cfg.yaml] [--seed N] ...``.

Writes ``<out>/<experiment>/<table>.csv`` plus ``summary.json`` and exits 0
only if every pass flag of the experiment is true.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ParameterError, RoughKacError
from .experiments import EXPERIMENTS, ExperimentConfig, ExperimentResult, run_experiment
from .io import write_csv, write_json

log = logging.getLogger("roughkac")

USAGE_ERROR = 2
FAILED = 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roughkac", description=__doc__.splitlines()[0])
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", type=Path, help="YAML file with ExperimentConfig fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--threads", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args) -> ExperimentConfig:
    data = {}
    if args.config is not None:
        loaded = yaml.safe_load(args.config.read_text(encoding="utf-8"))
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ParameterError(f"invalid config: {args.config} must hold a mapping")
        data.update(loaded)
    named = data.pop("experiment", args.experiment)
    if named != args.experiment:
        raise ParameterError(f"invalid config: file names experiment {named!r} but {args.experiment!r} was requested")
    for key in ("seed", "threads", "tol"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    return ExperimentConfig.from_dict(dict(data, experiment=args.experiment)).validate()


def flatten(prefix: str, obj, out: dict) -> dict:
    if isinstance(obj, dict):
        for k, v in obj.items():
            flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    else:
        out[prefix] = obj.tolist() if isinstance(obj, np.ndarray) else obj
    return out


def summary(cfg: ExperimentConfig, res: ExperimentResult, wall: float) -> dict:
    out = {"experiment": cfg.experiment, "version": __version__, "pass": res.passed, "wall_time": wall}
    if res.estimates:
        key = next(iter(res.estimates))
        out["estimate"] = res.estimates[key]
        if key in res.stderrs:
            out["stderr"] = res.stderrs[key]
    flatten("parameters", cfg.as_dict(), out)
    flatten("estimates", res.estimates, out)
    flatten("stderrs", res.stderrs, out)
    flatten("bound", res.bound, out)
    flatten("checks", res.checks, out)
    return out


def run(cfg: ExperimentConfig, out_dir: Path) -> tuple:
    t0 = time.perf_counter()
    res = run_experiment(cfg)
    wall = time.perf_counter() - t0
    target = Path(out_dir) / cfg.experiment
    for name, (header, rows) in res.tables.items():
        write_csv(target / f"{name}.csv", header, rows)
    summ = summary(cfg, res, wall)
    write_json(target / "summary.json", summ)
    return res, summ


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
    except (ParameterError, TypeError, OSError, yaml.YAMLError) as exc:
        parser.print_usage(sys.stderr)
        print(f"roughkac: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    try:
        res, summ = run(cfg, args.out)
    except RoughKacError as exc:
        print(f"roughkac: {cfg.experiment} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return FAILED
    for name, ok in res.checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {cfg.experiment}: {name}")
    print(f"wrote {Path(args.out) / cfg.experiment} in {summ['wall_time']:.1f}s")
    return 0 if res.passed else FAILED


if __name__ == "__main__":
    sys.exit(main())
