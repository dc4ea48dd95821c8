# src/rombif_mcp/cli.py
"""Command-line entry point: offline, query, detect, diagram, costs, serve."""

import argparse
import asyncio
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .archive import ArchiveClient
from .config import load_config_file
from .errors import ArchiveCorruptionError, ConfigError, RombifError
from .geometry import ParameterPoint
from .pipeline import bifurcation_diagram, costs, detect_many, query_online, run_offline
from .stability import DetectOptions, Indicator, Variant, trace_csv

logger = logging.getLogger(__name__)

VARIANTS = {"conv": Variant.CONVECTION_ONLY, "jac": Variant.FULL_JACOBIAN}
INDICATORS = {"tracked": Indicator.TRACKED_EIGENVALUE, "antisym": Indicator.ANTISYMMETRIC_EIGENVALUE}


def _threads(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("ROMBIF_THREADS")
    if env is None:
        return 1
    try:
        threads = int(env)
    except ValueError:
        raise ConfigError(f"ROMBIF_THREADS must be an integer, got '{env}'")
    if threads < 1:
        raise ConfigError(f"ROMBIF_THREADS must be positive, got {threads}")
    return threads


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8", newline="")
        logger.info(f"Wrote {output}")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _json(data) -> str:
    return json.dumps(data, indent=2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rombif",
        description="Reduced-basis detection of symmetry-breaking bifurcations in channel flow.",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="Worker count (falls back to ROMBIF_THREADS, then 1)")
    parser.add_argument("--output", type=str, default=None,
                        help="Write the result here instead of stdout (archive path for 'offline')")
    parser.add_argument("--seed", type=int, default=None, help="Override the perturbation seed")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("offline", help="Run an offline campaign and write its archive")
    p.add_argument("config", help="Campaign INI file")

    p = sub.add_parser("query", help="Online solve at one parameter point")
    p.add_argument("archive")
    p.add_argument("--re", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--reconstruct", action="store_true")
    p.add_argument("--symmetric", action="store_true")

    p = sub.add_parser("detect", help="Locate the symmetry-breaking Reynolds number")
    p.add_argument("archive")
    p.add_argument("--lambda", dest="lam", type=float, nargs="+", required=True)
    p.add_argument("--variant", choices=sorted(VARIANTS), default="jac")
    p.add_argument("--indicator", choices=sorted(INDICATORS), default="tracked")
    p.add_argument("--re-min", type=float, default=None)
    p.add_argument("--re-max", type=float, default=None)
    p.add_argument("--delta-re", type=float, default=None)
    p.add_argument("--asymmetric-base", action="store_true",
                   help="Linearize about the unconstrained online solution")
    p.add_argument("--trace", action="store_true", help="Emit the eigenvalue trace CSV instead of the summary")

    p = sub.add_parser("diagram", help="Pitchfork diagram at an axis probe")
    p.add_argument("archive")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--probe-x", type=float, default=1.0)
    p.add_argument("--re-min", type=float, default=None)
    p.add_argument("--re-max", type=float, default=None)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--include-unstable", action="store_true")
    p.add_argument("--sign", type=int, choices=[1, -1], default=1)

    p = sub.add_parser(
        "costs", help="Savings and break-even from the archive ledger (online timings are per process)"
    )
    p.add_argument("archive")
    p.add_argument("--detections", type=int, default=None)
    p.add_argument("--runs-per-detection", type=int, default=None)

    sub.add_parser("serve", help="Run the MCP stdio server")
    return parser


def _re_range(reader, lo: Optional[float], hi: Optional[float], required: bool = False):
    hull = reader.training_hull()
    if lo is None and hi is None and not required:
        return None
    if hull is None and (lo is None or hi is None):
        raise ConfigError("The archive has no training range; give both --re-min and --re-max")
    return (lo if lo is not None else hull["re"][0], hi if hi is not None else hull["re"][1])


def run(args: argparse.Namespace) -> None:
    threads = _threads(args.threads)
    client = ArchiveClient(base_dir=Path.cwd())

    if args.command == "offline":
        config = load_config_file(args.config)
        result = run_offline(config, client, args.output, threads, args.seed)
        _emit(_json(result.summary()), None)

    elif args.command == "query":
        reader = client.open(args.archive)
        result = query_online(
            reader, ParameterPoint(re=args.re, lam=args.lam),
            reconstruct=args.reconstruct, symmetric=args.symmetric,
        )
        _emit(_json(result.summary()), args.output)

    elif args.command == "detect":
        reader = client.open(args.archive)
        config = reader.config()
        online = config.online if config is not None else None
        options = DetectOptions(
            indicator=INDICATORS[args.indicator],
            symmetric_base=not args.asymmetric_base,
            **({} if online is None else {
                "constraint_mode": online.constraint_mode,
                "tol": online.tol,
                "max_iter": online.max_iter,
                "relaxation": online.relaxation,
            }),
        )
        results = detect_many(
            reader, args.lam, _re_range(reader, args.re_min, args.re_max),
            args.delta_re, VARIANTS[args.variant], options, threads,
        )
        if args.trace:
            _emit("".join(trace_csv(r.trace) for r in results), args.output)
        else:
            _emit(_json([r.summary() for r in results]), args.output)

    elif args.command == "diagram":
        reader = client.open(args.archive)
        re_range = _re_range(reader, args.re_min, args.re_max, required=True)
        re_values = np.linspace(re_range[0], re_range[1], args.count).tolist()
        diagram = bifurcation_diagram(
            reader, args.lam, re_values, args.probe_x, args.include_unstable, args.sign
        )
        _emit(diagram["csv"], args.output)

    elif args.command == "costs":
        reader = client.open(args.archive)
        _emit(_json(costs(reader, args.detections, args.runs_per_detection)), args.output)

    elif args.command == "serve":
        from .server import RombifMcpServer

        asyncio.run(RombifMcpServer().run())


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        run(args)
    except ArchiveCorruptionError as e:
        logger.error(f"Corrupted archive: {e}")
        return 2
    except RombifError as e:
        logger.error(f"{type(e).__name__}: {e}")
        for note in getattr(e, "__notes__", []):
            logger.error(note)
        return 1
    except KeyboardInterrupt:
        logger.info("Interrupted by user.")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
