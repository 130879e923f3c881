from typing import Optional

from pydantic import BaseModel


class HandTruth(BaseModel):
    center_world: tuple[float, float, float]
    voxel: tuple[int, int, int]  # person-volume coordinates of the noise-free center
    median_voxel: Optional[tuple[int, int, int]] = None  # per-axis lower median of the sampled hand points
    point_indices: list[int] = []
    voxels: list[tuple[int, int, int]] = []  # distinct person-volume voxels hit by hand points


class PersonTruth(BaseModel):
    id: int
    root_xy: tuple[int, int]  # room voxel
    root_world: tuple[float, float]
    volume_offset: tuple[int, int, int]  # room voxel of person-volume voxel (0, 0, 0)
    left: HandTruth
    right: HandTruth

    def hand(self, side: str) -> HandTruth:
        return self.left if side == "left" else self.right

    def room_voxel(self, side: str, mode: str = "center") -> tuple[int, int, int]:
        h = self.hand(side)
        local = h.median_voxel if mode == "median" and h.median_voxel is not None else h.voxel
        return tuple(int(a + b) for a, b in zip(local, self.volume_offset))


class FrameTruth(BaseModel):
    frame: int
    people: list[PersonTruth] = []
