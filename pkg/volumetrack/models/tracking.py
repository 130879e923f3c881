from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

HISTORY_CAPACITY = 1000

DescriptorKind = Literal["height", "color"]


@dataclass(frozen=True)
class Descriptor:
    kind: DescriptorKind
    vector: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class FlowResult:
    dx: float
    dy: float
    degenerate: bool = False


@dataclass(frozen=True)
class HistoryEntry:
    x: float
    y: float
    predicted: bool


@dataclass
class Trajectory:
    id: int
    appearance: Descriptor
    history: deque = field(default_factory=lambda: deque(maxlen=HISTORY_CAPACITY))
    velocity: tuple[float, float] = (0.0, 0.0)
    prob_sum: float = 0.0
    prob_count: int = 0
    hits: int = 0  # matched frames, drives the appearance running mean
    age: int = 0

    @property
    def person_score(self) -> float:
        return self.prob_sum / self.prob_count if self.prob_count else 0.0

    @property
    def position(self) -> tuple[float, float]:
        last = self.history[-1]
        return (last.x, last.y)

    def observe(self, prob: float) -> None:
        self.prob_sum += float(np.clip(prob, 0.0, 1.0))
        self.prob_count += 1


@dataclass
class TrackerConfig:
    gate_radius: float = 10.0
    max_edges: int = 10
    weights: tuple[float, float, float] = (1.0, 5.0, 20.0)
    tau_kill: float = 0.3
    probation: int = 3
    lk_window: int = 21
    lk_iters: int = 10
    lk_sigma: float = 1.0
    appearance_cap: int = 30
    matching_dump: Path | None = None  # JSON lines, one assignment per step


@dataclass
class TrackerState:
    config: TrackerConfig = field(default_factory=TrackerConfig)
    trajectories: list[Trajectory] = field(default_factory=list)
    next_id: int = 1
    frame: int = -1
    previous_map: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class TrackedPerson:
    """One reported trajectory at one frame."""
    frame: int
    id: int
    x: float
    y: float
    predicted: bool
    person_score: float
    appearance: Descriptor | None = field(default=None, compare=False, repr=False)

    @property
    def xy(self) -> tuple[int, int]:
        return (int(round(self.x)), int(round(self.y)))
