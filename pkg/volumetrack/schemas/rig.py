import numpy as np
from pydantic import BaseModel, TypeAdapter, field_validator

from volumetrack.models.camera import CameraModel


class CameraSpec(BaseModel):
    fx: float
    fy: float
    cx: float
    cy: float
    w: int
    h: int
    R: list[float]
    t: list[float]

    @field_validator("R")
    @classmethod
    def rotation_has_nine_values(cls, v: list[float]) -> list[float]:
        if len(v) != 9:
            raise ValueError("R must hold 9 floats, row-major")
        return v

    @field_validator("t")
    @classmethod
    def translation_has_three_values(cls, v: list[float]) -> list[float]:
        if len(v) != 3:
            raise ValueError("t must hold 3 floats")
        return v

    def to_camera(self) -> CameraModel:
        return CameraModel(self.fx, self.fy, self.cx, self.cy, self.w, self.h, np.reshape(self.R, (3, 3)), self.t)

    @classmethod
    def from_camera(cls, cam: CameraModel) -> "CameraSpec":
        return cls(
            fx=cam.fx, fy=cam.fy, cx=cam.cx, cy=cam.cy, w=cam.width, h=cam.height,
            R=cam.rotation.ravel().tolist(), t=cam.translation.tolist(),
        )


RigAdapter = TypeAdapter(list[CameraSpec])
