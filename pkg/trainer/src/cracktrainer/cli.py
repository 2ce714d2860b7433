"""CLI: train, crossval, serve."""

from __future__ import annotations

import argparse
import json
import sys

from .data import DatasetSpec
from .model import load_artifact


def cmd_train(args) -> int:
    from .train import fine_tune
    spec = DatasetSpec(root=args.data, val_fraction=args.val_fraction,
                       seed=args.seed)
    report = fine_tune(spec, backbone=args.backbone, epochs=args.epochs,
                       phase2_unfreeze_depth=args.unfreeze, out_dir=args.out)
    last = report.epochs[-1]
    print(f"trained {report.backbone}: train acc "
          f"{last['train_accuracy']:.3f}, val acc {last['val_accuracy']:.3f}; "
          f"artifact in {report.model_path}")
    return 0


def cmd_crossval(args) -> int:
    from .crossval import cross_validate
    model, meta = load_artifact(args.model)
    report = cross_validate(model, args.data, meta["input_size"])
    print(json.dumps({k: report[k] for k in ("n_total", "n_correct", "accuracy")},
                     indent=2))
    print(f"accuracy: {report['accuracy'] * 100:.3f}%")
    return 0


def cmd_serve(args) -> int:
    from .serve import serve
    model, meta = load_artifact(args.model)
    print(f"serving classifier on http://{args.host}:{args.port}")
    serve(model, meta, args.host, args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cracktrainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backbone", default="smallconv")
    p.add_argument("--unfreeze", type=int, default=1)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--out", default="model_out")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("crossval")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(fn=cmd_crossval)

    p = sub.add_parser("serve")
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    try:
        return args.fn(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
