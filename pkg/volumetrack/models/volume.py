from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

PERSON_DIMS = (80, 80, 100)
THIN_DIMS = (41, 41, 100)


@dataclass(frozen=True)
class GridSpec:
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    voxel_size: float = 0.02
    dims: tuple[int, int, int] = PERSON_DIMS
    ground_z: int = 1

    def __post_init__(self):
        if not self.voxel_size > 0:
            raise ValueError(f"voxel_size must be > 0, got {self.voxel_size}")
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise ValueError(f"all dims must be >= 1, got {self.dims}")
        if not 0 <= self.ground_z < self.dims[2]:
            raise ValueError(f"ground_z {self.ground_z} outside [0, {self.dims[2]})")

    @property
    def origin_array(self) -> np.ndarray:
        return np.asarray(self.origin, dtype=np.float64)

    def world_to_voxel(self, points: npt.ArrayLike) -> np.ndarray:
        """Floor quantization; a point on a boundary belongs to the higher-index voxel."""
        p = np.asarray(points, dtype=np.float64)
        return np.floor((p - self.origin_array) / self.voxel_size).astype(np.int64)

    def voxel_to_world(self, voxels: npt.ArrayLike) -> np.ndarray:
        """Voxel center in world meters."""
        v = np.asarray(voxels, dtype=np.float64)
        return self.origin_array + (v + 0.5) * self.voxel_size

    def sub_grid(self, offset: tuple[int, int, int], dims: tuple[int, int, int], ground_z: int | None = None) -> "GridSpec":
        """Grid whose voxel (0,0,0) is this grid's voxel `offset`."""
        origin = self.origin_array + np.asarray(offset, dtype=np.float64) * self.voxel_size
        return GridSpec(
            origin=tuple(float(c) for c in origin),
            voxel_size=self.voxel_size,
            dims=dims,
            ground_z=self.ground_z if ground_z is None else ground_z,
        )


@dataclass
class PointFrame:
    timestamp_index: int
    points: np.ndarray
    colors: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.isfinite(self.points).all():
            raise ValueError("frame contains non-finite coordinates")
        if self.colors is not None:
            self.colors = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
            if len(self.colors) != len(self.points):
                raise ValueError("colors and points differ in length")

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class OccupancyVolume:
    spec: GridSpec
    occupancy: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.occupancy = np.asarray(self.occupancy, dtype=bool)
        if self.occupancy.shape != tuple(self.spec.dims):
            raise ValueError(f"occupancy shape {self.occupancy.shape} != dims {self.spec.dims}")

    @classmethod
    def empty(cls, spec: GridSpec) -> "OccupancyVolume":
        return cls(spec, np.zeros(spec.dims, dtype=bool))

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.spec.dims)

    def count(self) -> int:
        return int(self.occupancy.sum())

    def indices(self) -> np.ndarray:
        """Occupied voxel indices, (K, 3), lexicographically sorted."""
        return np.argwhere(self.occupancy)


@dataclass
class VoxelizedFrame:
    """Quantized frame: per-point voxel indices plus the distinct occupied set.

    The room-sized occupancy grid is never materialized; feature maps and
    person sub-volumes are computed from `voxels`.
    """

    grid: GridSpec
    point_voxels: np.ndarray  # (N, 3) int64, every input point, may fall outside the grid
    inside: np.ndarray  # (N,) bool
    voxels: np.ndarray  # (K, 3) int64 unique in-grid voxels, lexicographic order
    colors: np.ndarray | None = None
