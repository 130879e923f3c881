from dataclasses import dataclass
from typing import Literal, Optional

NONE, LEFT, RIGHT = 0, 1, 2
HAND = 1
HANDS = ("left", "right")
HAND_LABELS = {"left": LEFT, "right": RIGHT}
FALLBACK_XYZ = (40, 40, 50)

LabelMode = Literal["topdown", "side"]


@dataclass(frozen=True)
class ViewKey:
    """Identifies the image being labeled: the top-down patch, or one side view of one hand's thin volume."""
    hand: Optional[str]
    direction: str  # "top" or one of SIDE_DIRECTIONS
    center_xy: tuple[int, int] = (40, 40)


TOP_VIEW = ViewKey(None, "top")


@dataclass(frozen=True)
class HandPoint:
    xyz: tuple[int, int, int]
    missing: bool = False
    xy_pixels: int = 0
    z_pixels: int = 0

    @classmethod
    def fallback(cls, xy_pixels: int = 0, z_pixels: int = 0) -> "HandPoint":
        return cls(FALLBACK_XYZ, True, xy_pixels, z_pixels)


@dataclass(frozen=True)
class HandEstimate:
    left: HandPoint
    right: HandPoint

    def __getitem__(self, hand: str) -> HandPoint:
        return {"left": self.left, "right": self.right}[hand]
