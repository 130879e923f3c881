from dataclasses import dataclass

import numpy as np

GROSS_ERROR = 20
HISTOGRAM_MAX = 60


@dataclass(frozen=True)
class ErrorRecord:
    frame: int
    person_id: int
    hand: str
    estimate: tuple[int, int, int]
    truth: tuple[int, int, int]
    error: int
    missing: bool = False
    method: str = ""


@dataclass
class Summary:
    """Population statistics of Manhattan errors; histogram bins 0..60 plus one overflow bin."""
    mean: float
    std: float
    gross_rate: float
    histogram: np.ndarray
    n: int


@dataclass
class TrackingMetrics:
    accuracy: float  # reported tracks associated with a person / reported tracks
    recall: float  # people associated with a track / people
    id_switches: int
    fragmentations: int
    false_tracks: int  # track ids never associated with anyone
    matches: int
    n_truth: int
    n_reported: int
