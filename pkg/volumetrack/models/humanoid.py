"""
Capsule/sphere humanoid. Body frame: x forward, y left, z up, origin on the floor
between the feet. All lengths in meters at height_scale 1.
"""

from dataclasses import dataclass, field

import numpy as np

LEG_LENGTH = 0.85
HIP_OFFSET = 0.10
LEG_RADIUS = 0.07
FOOT_LENGTH = 0.20
FOOT_RADIUS = 0.045
TORSO_RADIUS = 0.15
TORSO_BOTTOM = 0.85
TORSO_TOP = 1.45
SHOULDER_HEIGHT = 1.42
SHOULDER_OFFSET = 0.20
UPPER_ARM = 0.30
FOREARM = 0.27
ARM_RADIUS = 0.04
HEAD_RADIUS = 0.11
HEAD_HEIGHT = 1.60
HAND_RADIUS = 0.05


@dataclass(frozen=True)
class ArmPose:
    """Shoulder azimuth (0 = lateral, pi/2 = forward), shoulder elevation (0 = down), elbow flexion."""
    azimuth: float = 0.0
    elevation: float = 0.0
    flexion: float = 0.0


POSES: dict[str, tuple[ArmPose, ArmPose]] = {
    "tpose": (ArmPose(0.0, np.pi / 2, 0.0), ArmPose(0.0, np.pi / 2, 0.0)),
    "arms_down": (ArmPose(), ArmPose()),
    "reaching": (ArmPose(np.pi / 2, np.pi / 2, 0.0), ArmPose(np.pi / 2, np.pi / 2, 0.0)),
    "waving": (ArmPose(), ArmPose(0.3, 2.2, 1.2)),
}


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float
    name: str = ""

    @property
    def area(self) -> float:
        return 4.0 * np.pi * self.radius**2


@dataclass(frozen=True)
class Capsule:
    a: np.ndarray
    b: np.ndarray
    radius: float
    name: str = ""

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.asarray(self.b) - np.asarray(self.a)))

    @property
    def area(self) -> float:
        return 2.0 * np.pi * self.radius * self.length + 4.0 * np.pi * self.radius**2


@dataclass(frozen=True)
class Box:
    center: np.ndarray  # center of the bottom face
    size: np.ndarray
    name: str = ""

    @property
    def area(self) -> float:
        sx, sy, sz = self.size
        return 2.0 * (sx * sy + sy * sz + sx * sz)


@dataclass(frozen=True)
class Cylinder:
    center: np.ndarray  # center of the bottom disk
    radius: float
    height: float
    name: str = ""

    @property
    def area(self) -> float:
        return 2.0 * np.pi * self.radius * self.height + 2.0 * np.pi * self.radius**2


Primitive = Sphere | Capsule | Box | Cylinder


@dataclass
class HumanoidModel:
    x: float
    y: float
    heading: float = 0.0
    left: ArmPose = field(default_factory=ArmPose)
    right: ArmPose = field(default_factory=ArmPose)
    height_scale: float = 1.0

    def arm(self, side: str) -> ArmPose:
        return self.left if side == "left" else self.right


@dataclass
class Skeleton:
    """World-frame forward-kinematics result."""
    primitives: list[Primitive]
    shoulders: dict[str, np.ndarray]
    elbows: dict[str, np.ndarray]
    hands: dict[str, np.ndarray]
