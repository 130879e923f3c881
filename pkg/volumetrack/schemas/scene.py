from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

POSE_PRESETS = ("tpose", "arms_down", "reaching", "waving")


class PersonScript(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int = Field(ge=0, description="scripted identity, used for train/test splits")
    anchor: tuple[float, float]
    heading: float = 0.0
    walk_radius: float = Field(default=0.3, ge=0.0)
    walk_period: int = Field(default=120, ge=1)
    poses: list[str] = ["arms_down"]
    pose_period: int = Field(default=60, ge=1)
    pose_jitter: float = Field(default=0.1, ge=0.0)
    height_scale: float = Field(default=1.0, gt=0.0)
    color: tuple[int, int, int] = (200, 120, 80)

    @field_validator("poses")
    @classmethod
    def _known_poses(cls, value: list[str]) -> list[str]:
        if not value:
            raise ValueError("poses must name at least one preset")
        unknown = [p for p in value if p not in POSE_PRESETS]
        if unknown:
            raise ValueError(f"unknown pose presets {unknown}; supported: {list(POSE_PRESETS)}")
        return value


class ClutterItem(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["box", "cylinder"]
    center: tuple[float, float]
    size: tuple[float, float, float] = (0.5, 0.5, 0.75)  # box extents; cylinder uses (radius, -, height)
    color: tuple[int, int, int] = (120, 120, 120)


class SceneScript(BaseModel):
    model_config = ConfigDict(extra="forbid")

    frames: int = Field(ge=1)
    seed: int = Field(default=0, ge=0)
    room: tuple[float, float] = (6.0, 6.0)
    voxel_size: float = Field(default=0.02, gt=0.0)
    height_voxels: int = Field(default=100, ge=2)
    density: float = Field(default=2000.0, ge=0.0, description="points per square meter")
    noise: float = Field(default=0.005, ge=0.0, description="Gaussian sigma in meters")
    keep_prob: float = Field(default=1.0, ge=0.0, le=1.0)
    floor: bool = False
    min_separation: float = Field(default=0.4, ge=0.0)
    allow_close: bool = False
    people: list[PersonScript] = []
    clutter: list[ClutterItem] = []

    @field_validator("people")
    @classmethod
    def _unique_ids(cls, value: list[PersonScript]) -> list[PersonScript]:
        ids = [p.id for p in value]
        if len(ids) != len(set(ids)):
            raise ValueError(f"person ids must be unique, got {ids}")
        return value


class DatasetMeta(BaseModel):
    frames: int
    seed: int
    grid_origin: tuple[float, float, float]
    voxel_size: float
    grid_dims: tuple[int, int, int]
    ground_z: int
    people: list[int] = []
