from dataclasses import dataclass
from typing import Optional

import numpy as np

DETECTOR_SIZE = 51


@dataclass
class LinearDetector:
    weights: np.ndarray
    bias: float
    delta: float = -0.3
    nms_radius: int = 25

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (DETECTOR_SIZE, DETECTOR_SIZE):
            raise ValueError(f"detector weights must be 51x51, got {self.weights.shape}")


@dataclass(frozen=True)
class Proposal:
    xy: tuple[int, int]
    linear_score: float
    person_prob: Optional[float] = None
    accepted: Optional[bool] = None
