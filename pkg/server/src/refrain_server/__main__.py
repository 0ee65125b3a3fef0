"""Entry point: ``refrain-server --host 127.0.0.1 --port 8765``."""
from __future__ import annotations

import argparse
import sys

from .app import ServerConfig, create_app
from .encoder import available_models


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refrain-server",
        description="Serve text/frame embeddings and match scores over "
                    "the refrain wire protocol.")
    parser.add_argument("--model", default="lexical-hash-v1",
                        help=f"model identifier ({', '.join(available_models())})")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--dim", type=int, default=256)
    parser.add_argument("--batch-limit", type=int, default=256)
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ServerConfig(model=args.model, host=args.host, port=args.port,
                              batch_limit=args.batch_limit, dim=args.dim,
                              device=args.device)
        app = create_app(config)
    except (LookupError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    import uvicorn

    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
