"""Command line entry point.

Interactive mode serves the selected demo over a WebSocket for the browser
shell; --headless runs it to completion on a virtual clock and writes the
entropy CSV (plus figures when --figures is given).
"""

from __future__ import annotations

import argparse
import sys

from .gateway import ServerConfig, run_headless, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simdesk",
        description="Multi-view simulation desk gateway and batch runner.")
    parser.add_argument("--port", type=int, default=7350, help="TCP port (default 7350)")
    parser.add_argument("--host", default="127.0.0.1", help="bind address")
    parser.add_argument("--demo", choices=("kinetics", "network", "plots"),
                        default="kinetics", help="which demo to serve")
    parser.add_argument("--headless", action="store_true",
                        help="run without serving; requires --steps")
    parser.add_argument("--steps", type=int, default=None, help="steps to run headless")
    parser.add_argument("--seed", type=int, default=None, help="simulation seed")
    parser.add_argument("--export", dest="export_path", default=None,
                        help="entropy CSV output path (headless)")
    parser.add_argument("--refresh-ms", type=float, default=33.0,
                        help="frame/refresh interval in ms")
    parser.add_argument("--grid-m", type=int, default=10,
                        help="entropy grid cells per axis")
    parser.add_argument("--figures", dest="figures_dir", default=None,
                        help="directory for report figures (headless)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ServerConfig(
            port=args.port,
            demo=args.demo,
            headless=args.headless,
            steps=args.steps,
            seed=args.seed,
            export_path=args.export_path,
            refresh_ms=args.refresh_ms,
            grid_m=args.grid_m,
            figures_dir=args.figures_dir,
            host=args.host,
        )
    except ValueError as exc:
        print(f"simdesk: {exc}", file=sys.stderr)
        return 2
    if config.headless:
        return run_headless(config)
    serve(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
