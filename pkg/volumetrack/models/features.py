from dataclasses import dataclass, field

import numpy as np

SIDE_DIRECTIONS = ("+x", "-x", "+y", "-y")


@dataclass
class FeatureMaps:
    f_t: np.ndarray  # top surface, 1-based height, 0 = empty column
    f_s: np.ndarray  # occupied voxels per column
    f_b: np.ndarray  # N_z - z of the lowest above-ground voxel
    n_z: int
    stacked: np.ndarray = field(repr=False)  # (X, Y, 3) float32 in [0, 1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.f_t.shape

    @property
    def f_t_normalized(self) -> np.ndarray:
        return self.stacked[..., 0]


@dataclass
class SideViewSet:
    """Four (41, N_z, 3) images keyed by direction; channels are (near, sum, far)."""

    views: dict[str, np.ndarray]

    def __getitem__(self, direction: str) -> np.ndarray:
        return self.views[direction]

    def __iter__(self):
        return iter(SIDE_DIRECTIONS)
