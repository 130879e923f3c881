"""
Command-line entry point.

    volumetrack generate scene.json --out data/
    volumetrack train data/ --out models/detector.vtld
    volumetrack track data/ --out out/results.jsonl --config run.cfg
    volumetrack baseline data/ --out out/robust.jsonl --noise 2 --outlier-rate 0.25
    volumetrack eval out/results.jsonl out/robust.jsonl --gt data/gt.jsonl --out out/
    volumetrack features data/frames/frame_000000.pc4d --out out/features/
    volumetrack run pipeline.json
    volumetrack serve

Exit codes: 0 success, 2 config error, 3 data error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import ValidationError

from volumetrack import __version__
from volumetrack.config import get_settings, load_run_config
from volumetrack.engine import commands
from volumetrack.engine.executor import PipelineExecutor
from volumetrack.exceptions import ConfigError, VolumeTrackError
from volumetrack.schemas.run import PipelineDefinition
from volumetrack.utils.logging import configure_logging

logger = logging.getLogger("volumetrack.cli")


def _parse_set(items: Sequence[str]) -> dict[str, Any]:
    overrides = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        try:
            overrides[key] = json.loads(value)
        except json.JSONDecodeError:
            overrides[key] = value
    return overrides


def _run_config(args: argparse.Namespace, **flags: Any):
    overrides = _parse_set(args.set)
    overrides.update({k: v for k, v in flags.items() if v is not None})
    return load_run_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="volumetrack", description=__doc__.split("\n")[1].strip() or None)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p: argparse.ArgumentParser) -> argparse.ArgumentParser:
        p.add_argument("--config", type=Path, help="key = value run config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
        return p

    p = sub.add_parser("generate", help="write a synthetic dataset from a scene script")
    p.add_argument("script", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int)

    p = with_config(sub.add_parser("train", help="train the linear detector and the logistic verifier"))
    p.add_argument("dataset", type=Path)
    p.add_argument("--out", type=Path, required=True, help="detector model path (.vtld)")
    p.add_argument("--holdout", type=float, default=0.25)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--no-augment", action="store_true", help="skip 90-degree rotation augmentation")
    p.add_argument("--seed", type=int)

    p = with_config(sub.add_parser("track", help="track people and localize hands"))
    p.add_argument("dataset", type=Path)
    p.add_argument("--out", type=Path, required=True, help="results.jsonl")
    p.add_argument("--detector", type=Path, dest="detector_path")
    p.add_argument("--verifier", choices=["oracle", "logistic"])
    p.add_argument("--verifier-model", type=Path, dest="verifier_path")
    p.add_argument("--segmenter", choices=["oracle", "heuristic", "none"])
    p.add_argument("--threads", type=int)
    p.add_argument("--matching-dump", type=Path, dest="matching_dump", help="append every assignment problem to this JSON lines file")
    p.add_argument("--seed", type=int)

    p = with_config(sub.add_parser("baseline", help="multi-view triangulation baseline"))
    p.add_argument("dataset", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--rig", type=Path, dest="rig_path")
    p.add_argument("--method", choices=["robust", "lsq"], dest="baseline_method")
    p.add_argument("--noise", type=float, dest="noise_px", help="keypoint noise sigma in pixels")
    p.add_argument("--outlier-rate", type=float, dest="outlier_rate", help="fraction of hands with one corrupted view")
    p.add_argument("--outlier-view", type=int, dest="outlier_view", help="corrupt this view instead of a random one")
    p.add_argument("--tau", type=float)
    p.add_argument("--seed", type=int)

    p = with_config(sub.add_parser("eval", help="hand error statistics and tracking metrics"))
    p.add_argument("results", type=Path, nargs="+")
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--svg", action="store_true", default=None)
    p.add_argument("--gt-mode", choices=["center", "median"], dest="gt_mode")

    p = with_config(sub.add_parser("features", help="dump f_t / f_s / f_b of one frame as 16-bit PGM"))
    p.add_argument("frame", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("run", help="execute a pipeline definition (JSON)")
    p.add_argument("pipeline", type=Path)

    p = sub.add_parser("serve", help="start the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def dispatch(args: argparse.Namespace) -> int:
    settings = get_settings()
    if args.command == "generate":
        out = commands.cmd_generate(args.script, args.out, args.seed)
    elif args.command == "train":
        config = _run_config(args, seed=args.seed)
        out = commands.cmd_train(args.dataset, args.out, config, args.holdout, args.epochs, augment=not args.no_augment)
    elif args.command == "track":
        config = _run_config(
            args, detector_path=args.detector_path, verifier=args.verifier, verifier_path=args.verifier_path,
            segmenter=args.segmenter, matching_dump=args.matching_dump, seed=args.seed,
        )
        out = commands.cmd_track(args.dataset, args.out, config, args.threads or settings.THREADS)
    elif args.command == "baseline":
        config = _run_config(
            args, rig_path=args.rig_path, baseline_method=args.baseline_method, noise_px=args.noise_px,
            outlier_rate=args.outlier_rate, outlier_view=args.outlier_view, tau=args.tau, seed=args.seed,
        )
        out = commands.cmd_baseline_triangulate(args.dataset, args.out, config)
    elif args.command == "eval":
        config = _run_config(args, svg=args.svg, gt_mode=args.gt_mode)
        out = commands.cmd_eval(args.results, args.gt, args.out, config)
    elif args.command == "features":
        out = commands.cmd_features(args.frame, args.out, _run_config(args))
    elif args.command == "run":
        try:
            definition = PipelineDefinition.model_validate_json(args.pipeline.read_bytes())
        except (OSError, ValidationError) as e:
            raise ConfigError(f"invalid pipeline definition {args.pipeline}: {e}") from e
        run = PipelineExecutor().execute(definition)
        for stage in run.stage_runs:
            logger.info("%-12s %-9s %9.1f ms", stage.key, stage.status, stage.execution_time_ms)
        if run.status != "completed":
            logger.error("%s", run.error)
            return run.exit_code or 1
        out = run.output_payload
    elif args.command == "serve":
        import uvicorn

        uvicorn.run("volumetrack.main:app", host=args.host, port=args.port)
        return 0
    else:  # argparse rejects unknown commands first
        return 2
    print(json.dumps(out, indent=2, default=str))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = get_settings()
    if args.verbose:
        settings = settings.model_copy(update={"LOG_LEVEL": "DEBUG"})
    configure_logging(settings)
    try:
        return dispatch(args)
    except VolumeTrackError as e:
        logger.error("%s", e)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
