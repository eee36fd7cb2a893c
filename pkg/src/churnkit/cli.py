"""Command-line entry point.

    churnkit [--config FILE] [--seed N] [--out-dir DIR] [--threads N] [-q|-v] COMMAND

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import _kernels
from .config import MODEL_NAMES, load_config
from .errors import ChurnkitError
from .pipeline import (
    cmd_compare,
    cmd_evaluate,
    cmd_explain,
    cmd_preprocess,
    cmd_train,
    make_synthetic,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="churnkit", description="Churn prediction pipeline.")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, help="master seed for split, forest, boosting and background")
    p.add_argument("--out-dir", help="output directory (default from config)")
    p.add_argument("--data", help="dataset CSV path (overrides data.path)")
    p.add_argument("--threads", type=int, help="worker threads; never changes results")
    g = p.add_mutually_exclusive_group()
    g.add_argument("-q", "--quiet", action="store_true")
    g.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a seeded synthetic telco-style CSV")
    s.add_argument("output")
    s.add_argument("--rows", type=int, default=3333)

    sub.add_parser("preprocess", help="check, convert and split the dataset")

    s = sub.add_parser("train", help="train one model on the training partition")
    s.add_argument("model", help=f"one of {', '.join(MODEL_NAMES)}")

    s = sub.add_parser("evaluate", help="classification report and curves")
    s.add_argument("model_file")
    s.add_argument("--on-train", action="store_true", help="score the training partition instead")

    sub.add_parser("compare", help="train and compare all four classifiers")

    s = sub.add_parser("explain", help="Shapley attributions for a model")
    s.add_argument("model_file")
    s.add_argument("--rows", help="comma-separated test-row indices")
    s.add_argument("--summary", action="store_true", help="explain every test row and rank features")
    s.add_argument("--exact", action="store_true", help="brute-force subset enumeration (any model)")
    s.add_argument("--on-train", action="store_true")
    return p


def run(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)

    if args.command == "synth":
        make_synthetic(args.output, args.rows, args.seed or 0)
        return 0

    cfg = load_config(
        args.config,
        seed=args.seed,
        out_dir=args.out_dir,
        data_path=args.data,
        threads=args.threads,
        verbosity=0 if args.quiet else 2 if args.verbose else None,
    )
    logging.getLogger("churnkit").debug("kernel backend: %s", _kernels.backend_name())
    if args.command == "preprocess":
        out = cmd_preprocess(cfg)
    elif args.command == "train":
        cmd_train(cfg, args.model)
        out = {"model_file": f"{cfg.out_dir}/models/{args.model}.json"}
    elif args.command == "evaluate":
        doc = cmd_evaluate(cfg, args.model_file, on_train=args.on_train)
        out = {k: doc[k] for k in ("accuracy", "roc_auc", "confusion") if k in doc}
    elif args.command == "compare":
        doc = cmd_compare(cfg)
        out = {"rows": [{k: r[k] for k in ("classifier", "accuracy", "f1")} for r in doc["rows"]],
               "ranking_by_f1": doc["ranking_by_f1"]}
    elif args.command == "explain":
        result, rows, _ = cmd_explain(
            cfg, args.model_file, rows=args.rows, summary=args.summary,
            exact=args.exact, on_train=args.on_train,
        )
        out = {"rows": len(rows), "base_value": result.base_value}
    if not args.quiet:
        print(json.dumps(out, indent=1, sort_keys=True))
    return 0


def main(argv=None):
    try:
        code = run(argv)
    except ChurnkitError as exc:
        print(f"churnkit: error: {exc}", file=sys.stderr)
        code = exc.exit_code
    except (ValueError, OSError) as exc:
        # anything the library raises outside its own hierarchy is a data problem
        print(f"churnkit: error: {exc}", file=sys.stderr)
        code = 2
    sys.exit(code)


if __name__ == "__main__":
    main()
