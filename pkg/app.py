"""
COREL Lab - Main Application
Entry point for the command line: train, sweep-lambda, export-latents, cluster, compare
"""

import argparse
import json
import sys
from dataclasses import fields
from typing import Any, Dict, List, Optional

from src import pipelines
from src.run_config import RunConfig
from src.utils.exceptions import ConfigError, CorelError, CsvParseError, IdxFormatError
from src.utils.logger import get_logger

logger = get_logger(__name__)

# Errors reported with exit status 2; every other failure exits 1
USAGE_ERRORS = (ConfigError, CsvParseError, IdxFormatError)

# RunConfig fields with a dedicated flag instead of a generated one
_DEDICATED = {"seeds", "out_dir"}


def _parse_value(raw: str) -> Any:
    """JSON first ('0.5', 'null', '[128, 128]', 'true'), plain string otherwise."""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _parse_seeds(raw: str) -> List[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"--seed expects N[,N...], got '{raw}'") from e


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="flat JSON config file")
    parser.add_argument("--seed", help="seed list, e.g. 0,1,2")
    parser.add_argument("--out", help="output directory")
    group = parser.add_argument_group("config overrides (values parsed as JSON)")
    for f in fields(RunConfig):
        if f.name in _DEDICATED:
            continue
        flags = [f"--{f.name}"]
        if "_" in f.name:
            flags.append(f"--{f.name.replace('_', '-')}")
        group.add_argument(*flags, dest=f"override_{f.name}", metavar="VALUE", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="app.py",
        description="Attraction-repulsion loss training and latent clusterability lab")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="train one model per seed")
    _add_common(train)

    sweep = commands.add_parser("sweep-lambda", help="best validation accuracy over a lambda grid")
    _add_common(sweep)
    sweep.add_argument("--grid", help="comma separated lambda values in (0, 1]")

    export = commands.add_parser("export-latents", help="latent and PCA CSVs from a checkpoint")
    _add_common(export)
    export.add_argument("--checkpoint", required=True)
    export.add_argument("--split", default="test", choices=["train", "val", "test"])

    cluster = commands.add_parser("cluster", help="k-means and GMM on an exported latent CSV")
    _add_common(cluster)
    cluster.add_argument("--latents", required=True)
    cluster.add_argument("--k", type=int, required=True)

    compare = commands.add_parser("compare", help="compare aggregate.json files across variants")
    _add_common(compare)
    compare.add_argument("--reports", nargs="+", required=True)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    values = {}
    for f in fields(RunConfig):
        raw = getattr(args, f"override_{f.name}", None)
        if raw is not None:
            values[f.name] = _parse_value(raw)
    if args.seed is not None:
        values["seeds"] = _parse_seeds(args.seed)
    if args.out is not None:
        values["out_dir"] = args.out
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """
    Config file plus flag overrides. export-latents without --config starts
    from the configuration embedded in its checkpoint.
    """
    overrides = _overrides(args)
    if args.config is None and args.command == "export-latents":
        embedded = pipelines.read_checkpoint_metadata(args.checkpoint).get("config")
        if embedded:
            logger.info(f"Using the configuration embedded in {args.checkpoint}")
            return RunConfig.from_dict({**embedded, **overrides})
    return RunConfig.from_file(args.config, overrides)


def _parse_grid(raw: Optional[str]) -> Optional[List[float]]:
    if raw is None:
        return None
    try:
        return [float(part) for part in raw.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"--grid expects comma separated numbers, got '{raw}'") from e


def run(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    logger.info(f"{args.command}: config {cfg.config_hash()[:12]}, seeds {cfg.seeds}, out {cfg.out_dir}")

    if args.command == "train":
        summary = pipelines.cmd_train(cfg)
        if summary["failed_seeds"]:
            logger.error(f"Training diverged for seeds {summary['failed_seeds']}")
            return 1
    elif args.command == "sweep-lambda":
        pipelines.cmd_sweep_lambda(cfg, _parse_grid(args.grid))
    elif args.command == "export-latents":
        pipelines.cmd_export_latents(cfg, args.checkpoint, args.split)
    elif args.command == "cluster":
        pipelines.cmd_cluster(cfg, args.latents, args.k)
    elif args.command == "compare":
        pipelines.cmd_compare(cfg, args.reports)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        return run(args)
    except USAGE_ERRORS as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 2
    except CorelError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return 1
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
