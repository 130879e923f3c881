"""
Stage handler registry.
Every handler takes resolved params plus the run context and returns {"output": {...}};
params name paths and an optional run config (`config` file and/or `overrides`).
"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any

from volumetrack.config import RunConfig, get_settings, load_run_config
from volumetrack.engine import commands
from volumetrack.exceptions import ConfigError


def _config(params: dict) -> RunConfig:
    return load_run_config(params.get("config"), params.get("overrides") or {})


def _require(params: dict, *names: str) -> list[Any]:
    missing = [n for n in names if params.get(n) in (None, "")]
    if missing:
        raise ConfigError(f"missing stage params: {missing}")
    return [params[n] for n in names]


class BaseStageHandler(ABC):
    @abstractmethod
    def execute(self, params: dict, context: dict) -> dict:
        """Run the stage and return a result dict with an 'output' key."""
        pass


class GenerateStageHandler(BaseStageHandler):
    def execute(self, params: dict, context: dict) -> dict:
        script, out_dir = _require(params, "script", "out_dir")
        return {"output": commands.cmd_generate(Path(script), Path(out_dir), params.get("seed"))}


class TrainStageHandler(BaseStageHandler):
    def execute(self, params: dict, context: dict) -> dict:
        dataset, out_model = _require(params, "dataset", "out_model")
        output = commands.cmd_train(
            Path(dataset),
            Path(out_model),
            _config(params),
            holdout=float(params.get("holdout", 0.25)),
            epochs=int(params.get("epochs", 10)),
            augment=bool(params.get("augment", True)),
        )
        return {"output": output}


class TrackStageHandler(BaseStageHandler):
    def execute(self, params: dict, context: dict) -> dict:
        dataset, out = _require(params, "dataset", "out")
        threads = int(params.get("threads") or get_settings().THREADS)
        return {"output": commands.cmd_track(Path(dataset), Path(out), _config(params), threads)}


class BaselineStageHandler(BaseStageHandler):
    def execute(self, params: dict, context: dict) -> dict:
        dataset, out = _require(params, "dataset", "out")
        return {"output": commands.cmd_baseline_triangulate(Path(dataset), Path(out), _config(params))}


class EvalStageHandler(BaseStageHandler):
    def execute(self, params: dict, context: dict) -> dict:
        results, gt, out_dir = _require(params, "results", "gt", "out_dir")
        paths = [Path(p) for p in (results if isinstance(results, list) else [results])]
        return {"output": commands.cmd_eval(paths, Path(gt), Path(out_dir), _config(params))}


class FeaturesStageHandler(BaseStageHandler):
    def execute(self, params: dict, context: dict) -> dict:
        frame, out_dir = _require(params, "frame", "out_dir")
        return {"output": commands.cmd_features(Path(frame), Path(out_dir), _config(params))}


_HANDLERS: dict[str, type[BaseStageHandler]] = {
    "generate": GenerateStageHandler,
    "train": TrainStageHandler,
    "track": TrackStageHandler,
    "baseline": BaselineStageHandler,
    "eval": EvalStageHandler,
    "features": FeaturesStageHandler,
}


def get_stage_handler(stage_type: str) -> BaseStageHandler:
    handler_class = _HANDLERS.get(stage_type)
    if not handler_class:
        raise ConfigError(f"Unknown stage type: '{stage_type}'. Supported: {list(_HANDLERS.keys())}")
    return handler_class()
