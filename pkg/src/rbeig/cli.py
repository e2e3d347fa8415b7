"""Command line entry point: ``rbeig {train,evaluate,timing,study}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as C
from . import container as store
from . import experiments as X


def _config(args):
    if args.config:
        return C.load(args.config, args.seed, args.paper_scale)
    return C.normalize({}, args.seed, args.paper_scale)


def _container(args):
    """Container under ``--out``; trained on the fly when missing and a config is given."""
    out = Path(args.out)
    if (out / store.MANIFEST).exists():
        expected = _config(args) if args.config else None
        return store.load(out, expected)
    if not args.config:
        raise store.ContainerError(f"no container in {out}; run `train` first or pass --config")
    cont, _ = X.cmd_train(_config(args), out, args.with_oracle)
    return cont


def main(argv=None):
    p = argparse.ArgumentParser(prog="rbeig", description=__doc__)
    p.add_argument("command", choices=["train", "evaluate", "timing", "study"])
    p.add_argument("--config", help="experiment JSON config (defaults are used when omitted)")
    p.add_argument("--out", default="out", help="container / report directory")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--with-oracle", action="store_true", help="store or use detailed matrices for error columns")
    p.add_argument("--paper-scale", action="store_true", help="paper mesh widths and sample sizes")
    p.add_argument("--repetitions", type=int, help="timing repetitions (default from config)")
    p.add_argument("--variants", nargs="*", choices=list(X.STUDY_VARIANTS), help="study variants")
    p.add_argument("-v", "--verbose", action="store_true")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    stage = args.command
    try:
        if args.command == "train":
            cfg = _config(args)
            _, summary = X.cmd_train(cfg, args.out, args.with_oracle)
            print(json.dumps(summary, indent=2, sort_keys=True))
        elif args.command == "evaluate":
            cont = _container(args)
            if args.with_oracle and not cont.has_oracle:
                raise store.ContainerError("container has no oracle data; retrain with --with-oracle")
            print(json.dumps(X.cmd_evaluate(cont, args.out, args.with_oracle), indent=2, sort_keys=True))
        elif args.command == "timing":
            rows = X.cmd_timing(_container(args), args.out, args.repetitions)
            print("N,detailed_s,reduced_solve_s,reduced_with_eta_s,eta_s,reconstruction_s,speedup")
            for r in rows:
                print(",".join(f"{v:.6g}" for v in r))
        else:
            cfg = _config(args)
            X.cmd_convergence_study(cfg, args.out, args.variants)
            print(f"study CSVs written to {args.out}")
    except (C.ConfigError, store.ContainerError) as exc:
        print(f"rbeig {stage}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # surfaced with stage context
        print(f"rbeig {stage} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0
