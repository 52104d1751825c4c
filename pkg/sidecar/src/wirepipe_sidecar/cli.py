"""Command-line entry point."""

import argparse
import sys

from . import SidecarError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wirepipe-sidecar",
        description="Batch-encode texts into the binary embedding format",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    enc = sub.add_parser("encode", help="encode a JSONL file of {id, text} rows")
    enc.add_argument("--input", required=True, help="encode-input JSONL path")
    enc.add_argument("--model", required=True, help="model id or checkpoint directory")
    enc.add_argument("--out", required=True, help="output embedding file path")
    enc.add_argument("--batch-size", type=int, default=32)

    mk = sub.add_parser(
        "make-checkpoint",
        help="build a deterministic word-vector checkpoint for offline use",
    )
    mk.add_argument("--vocab", required=True, help="token or token<TAB>weight lines")
    mk.add_argument("--out", required=True, help="checkpoint directory to create")
    mk.add_argument("--dim", type=int, default=64)
    mk.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "encode":
            from .encoder import encode_to_file, load_model, read_encode_input

            pairs = read_encode_input(args.input)
            model = load_model(args.model)
            count = encode_to_file(pairs, model, args.out, args.batch_size)
            print(f"encode: records={count} out={args.out}")
        else:
            from .checkpoint import build_checkpoint, read_vocab_file

            vocab = read_vocab_file(args.vocab)
            path = build_checkpoint(vocab, args.out, dim=args.dim, seed=args.seed)
            print(f"make-checkpoint: tokens={len(vocab)} dim={args.dim} out={path}")
    except SidecarError as exc:
        print(f"{args.command} failed at {exc.stage}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
