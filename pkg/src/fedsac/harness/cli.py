"""Command-line entry point: ``fedsac run | sweep | compare``.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from ..errors import ConfigError, FedSaCError
from . import outputs, runner
from .config import OUTPUT_DIR_ENV, load_config

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("fedsac")


def _levels(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--levels must be comma-separated numbers, got {text!r}") from None


def cmd_run(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    history = runner.run(cfg, trace=args.trace_matrices)
    out = outputs.emit_outputs(history, cfg)
    print(f"{cfg.method}: final mean accuracy {history.records[-1].mean_accuracy:.4f} -> {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    levels = _levels(args.levels)
    try:
        rows = runner.run_complementarity_sweep(cfg, levels, args.kind)
    except FedSaCError as e:
        if not levels or levels[0] != 0 or levels != sorted(levels):
            raise ConfigError(str(e)) from e
        raise
    out = outputs.emit_sweep(rows, cfg, args.kind)
    for r in rows:
        print(f"level {r['level']:.3f}  local {r['local_accuracy']:.4f}  coop {r['coop_accuracy']:.4f}"
              f"  S {r['similarity']:.4f}  C {r['complementarity']:.4f}")
    print(f"sweep -> {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    paths = [p for p in args.configs.split(",") if p.strip()]
    if not paths:
        raise ConfigError("--configs needs at least one path")
    cfgs = [load_config(p, seed=args.seed) for p in paths]
    curves = {}
    for path, cfg in zip(paths, cfgs):
        label = Path(path).stem
        while label in curves:
            label += "_"
        curves[label] = runner.run(cfg).mean_curve()
        print(f"{label}: final mean accuracy {curves[label][-1]:.4f}")
    out = Path(args.out)
    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if env_dir:
        out = Path(env_dir) / out.name
    outputs.emit_compare(curves, out)
    print(f"compare -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedsac", description="Federated learning simulator.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-round progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment and write its output directory")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--trace-matrices", action="store_true", help="write W, S, C for every round")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="two-client shift sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--levels", default="0,0.25,0.5,0.75,1.0")
    p.add_argument("--kind", choices=("covariate", "concept"), default="covariate")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="joint CSV of mean-accuracy curves for several configs")
    p.add_argument("--configs", required=True, help="comma-separated config paths")
    p.add_argument("--out", default="compare.csv")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FedSaCError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
