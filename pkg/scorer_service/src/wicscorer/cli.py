"""Command line: train a scorer, serve it, or emit the synthetic fixture."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .data import load_wic_jsonl, make_separable_fixture, write_jsonl
from .train import TrainConfig, train


def cmd_train(args) -> int:
    overrides = {}
    if args.config:
        overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(overrides) - known
    if unknown:
        raise SystemExit(f"unknown config keys: {sorted(unknown)}")
    for name in ("base_model", "epochs", "learning_rate", "seed"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    config = TrainConfig(**overrides)
    records = load_wic_jsonl(args.train)
    val_records = load_wic_jsonl(args.val) if args.val else None
    result = train(records, config, args.out, val_records)
    last = result.metrics[-1]
    print(f"trained {config.base_model} for {config.epochs} epochs: "
          f"train_acc={last['train_acc']:.3f} -> {result.artifact_dir}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .serve import create_app

    uvicorn.run(create_app(args.model), host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_make_fixture(args) -> int:
    fixture = make_separable_fixture(seed=args.seed)
    out = Path(args.out)
    write_jsonl(out / "train-pairs.jsonl", fixture["train_pairs"])
    write_jsonl(out / "held-pairs.jsonl", fixture["held_pairs"])
    write_jsonl(out / "wsd-support.jsonl", fixture["wsd_support"])
    write_jsonl(out / "wsd-targets.jsonl", fixture["wsd_targets"])
    print(f"fixture written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wicscorer",
                                     description="WiC pair classifier: train and serve")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fine-tune/train the pair classifier")
    p.add_argument("--train", required=True, help="WiC JSONL training file")
    p.add_argument("--val", help="optional WiC JSONL validation file")
    p.add_argument("--out", required=True, help="artifact output directory")
    p.add_argument("--config", help="JSON file with TrainConfig overrides")
    p.add_argument("--base-model", dest="base_model")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("serve", help="serve scores over HTTP")
    p.add_argument("--model", required=True, help="artifact directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8571)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("make-fixture", help="write the separable synthetic fixture")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=11)
    p.set_defaults(func=cmd_make_fixture)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
