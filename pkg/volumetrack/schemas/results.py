
from pydantic import BaseModel


class TrackLogRecord(BaseModel):
    frame: int
    id: int
    x: float
    y: float
    predicted: bool
    person_score: float


class HandResult(BaseModel):
    local: tuple[int, int, int]  # person-volume voxel
    room: tuple[int, int, int]  # room voxel
    world: tuple[float, float, float]  # meters, voxel center
    missing: bool = False


class PersonResult(BaseModel):
    frame: int
    track_id: int
    method: str = "decomposition"
    center: tuple[int, int]
    person_score: float
    left: HandResult
    right: HandResult
    predicted: bool = False

    def hand(self, side: str) -> HandResult:
        return self.left if side == "left" else self.right
