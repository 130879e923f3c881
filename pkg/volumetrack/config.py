import json
import os
from functools import lru_cache
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from volumetrack.exceptions import ConfigError


class Settings(BaseSettings):
    THREADS: int = Field(default_factory=lambda: os.cpu_count() or 1)
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(levelname)-5.5s [%(name)s] %(message)s"
    CORS_ORIGINS: list[str] = ["http://localhost:3000"]
    DEV_MODE: bool = False
    RUNS_DIR: Path = Path("runs")

    model_config = SettingsConfigDict(env_prefix="VOLUMETRACK_", env_file=".env", extra="ignore")


@lru_cache()
def get_settings() -> Settings:
    return Settings()


class RunConfig(BaseModel):
    """Everything a pipeline command needs. Grid fields left unset are taken from the dataset meta."""

    model_config = ConfigDict(extra="forbid")

    # grid
    grid_origin: Optional[tuple[float, float, float]] = None
    voxel_size: Optional[float] = None
    grid_dims: Optional[tuple[int, int, int]] = None
    ground_z: Optional[int] = None
    align_rotation: list[float] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
    align_translation: list[float] = [0.0, 0.0, 0.0]

    # detection
    detector_path: Optional[Path] = None
    verifier: Literal["oracle", "logistic"] = "oracle"
    verifier_path: Optional[Path] = None
    p_min: float = 0.5
    oracle_radius: int = 8
    oracle_miss_prob: float = 0.0

    # hands
    segmenter: Literal["oracle", "heuristic", "none"] = "oracle"
    flip_rate: float = 0.0
    wipe_prob: float = 0.0

    # tracking / matching
    appearance: Literal["height", "color"] = "height"
    lambda_d: float = 1.0
    lambda_a: float = 5.0
    lambda_p: float = 20.0
    gate_radius: float = 10.0
    max_edges: int = 10
    tau_kill: float = 0.3
    probation: int = 3
    lk_window: int = 21
    lk_iters: int = 10
    lk_sigma: float = 1.0
    matching_dump: Optional[Path] = None

    # triangulation baseline
    tau: float = 30.0
    rig_path: Optional[Path] = None
    baseline_method: Literal["robust", "lsq"] = "robust"
    search: Literal["occupied", "dilated"] = "dilated"
    dilation: int = 3
    noise_px: float = 0.0
    outlier_rate: float = 0.0
    outlier_px: float = 200.0
    outlier_view: Optional[int] = None

    # evaluation
    gt_gate: float = 10.0
    gt_mode: Literal["center", "median"] = "center"
    svg: bool = False

    seed: int = 0

    @field_validator("detector_path", "verifier_path", "rig_path")
    @classmethod
    def _path_exists(cls, value: Optional[Path]) -> Optional[Path]:
        if value is not None and not Path(value).exists():
            raise ValueError(f"path does not exist: {value}")
        return value

    @field_validator("align_rotation")
    @classmethod
    def _rotation_orthonormal(cls, value: list[float]) -> list[float]:
        if len(value) != 9:
            raise ValueError("align_rotation needs 9 values (row-major 3x3)")
        r = np.asarray(value, dtype=np.float64).reshape(3, 3)
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6):
            raise ValueError("align_rotation is not orthonormal")
        return value

    @field_validator("align_translation")
    @classmethod
    def _translation_len(cls, value: list[float]) -> list[float]:
        if len(value) != 3:
            raise ValueError("align_translation needs 3 values")
        return value

    @field_validator("lk_window")
    @classmethod
    def _odd_window(cls, value: int) -> int:
        if value < 3 or value % 2 == 0:
            raise ValueError("lk_window must be an odd integer >= 3")
        return value


def parse_key_value(text: str) -> dict[str, Any]:
    """Parse `key = value` lines; values are JSON when they parse as JSON, strings otherwise."""
    data: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            data[key] = json.loads(value)
        except json.JSONDecodeError:
            data[key] = value
    return data


def load_run_config(path: Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    data: dict[str, Any] = {}
    if path is not None:
        try:
            data.update(parse_key_value(Path(path).read_text()))
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
    # flags win over the file
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"invalid run config: {problems}") from e
