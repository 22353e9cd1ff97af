"""Command-line entry point: start the encoder service."""

from __future__ import annotations

import argparse
import sys

from .app import EncoderService
from .config import ARCHS, ServiceConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="encoder-service", description=__doc__)
    parser.add_argument("--arch", choices=ARCHS, default="resnet18")
    parser.add_argument("--checkpoint", help="state-dict file; random seeded init when omitted")
    parser.add_argument("--seed", type=int, default=0, help="init seed when no checkpoint is given")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--input-size", type=int, default=224)
    parser.add_argument("--map-h", type=int, help="declared grid height (defaults per arch)")
    parser.add_argument("--map-w", type=int, help="declared grid width")
    parser.add_argument("--dim", type=int, help="declared feature dimension")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=9000)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ServiceConfig(
            arch=args.arch,
            checkpoint=args.checkpoint,
            seed=args.seed,
            device=args.device,
            input_size=args.input_size,
            map_h=args.map_h,
            map_w=args.map_w,
            feature_dim=args.dim,
            host=args.host,
            port=args.port,
        )
        service = EncoderService(config)
    except Exception as exc:
        print(f"startup failure: {exc}", file=sys.stderr)
        return 1
    print(f"serving {config.arch} "
          f"({config.map_h}x{config.map_w}x{config.feature_dim}) on {service.url}", flush=True)
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
