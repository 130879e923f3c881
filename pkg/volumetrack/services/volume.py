"""
Point cloud -> occupancy.
- floor quantization at the grid's voxel size
- dense voxelization for person-scale grids
- sparse quantization for the room (distinct voxel set only)
- person (80x80x100) and thin (41x41x100) crops with zero fill
"""

import logging

import numpy as np

from volumetrack.models.volume import (
    PERSON_DIMS,
    THIN_DIMS,
    GridSpec,
    OccupancyVolume,
    PointFrame,
    VoxelizedFrame,
)

logger = logging.getLogger(__name__)


def align_frame(frame: PointFrame, rotation: np.ndarray, translation: np.ndarray) -> PointFrame:
    """Apply the world-to-volume rigid transform (floor parallel to xy)."""
    r = np.asarray(rotation, dtype=np.float64).reshape(3, 3)
    t = np.asarray(translation, dtype=np.float64).reshape(3)
    return PointFrame(frame.timestamp_index, frame.points @ r.T + t, frame.colors)


def quantize_frame(frame: PointFrame, spec: GridSpec) -> VoxelizedFrame:
    point_voxels = spec.world_to_voxel(frame.points)
    dims = np.asarray(spec.dims)
    inside = np.all((point_voxels >= 0) & (point_voxels < dims), axis=1)
    dropped = len(inside) - int(inside.sum())
    if dropped:
        logger.debug("frame %d: %d points outside the grid dropped", frame.timestamp_index, dropped)
    voxels = np.unique(point_voxels[inside], axis=0) if inside.any() else np.zeros((0, 3), dtype=np.int64)
    return VoxelizedFrame(spec, point_voxels, inside, voxels.astype(np.int64), frame.colors)


def voxelize(frame: PointFrame, spec: GridSpec) -> OccupancyVolume:
    volume = OccupancyVolume.empty(spec)
    vf = quantize_frame(frame, spec)
    if len(vf.voxels):
        volume.occupancy[vf.voxels[:, 0], vf.voxels[:, 1], vf.voxels[:, 2]] = True
    return volume


def _crop_dense(occupancy: np.ndarray, offset: tuple[int, int, int], dims: tuple[int, int, int]) -> np.ndarray:
    out = np.zeros(dims, dtype=bool)
    src, dst = [], []
    for axis in range(3):
        lo = offset[axis]
        s0, s1 = max(lo, 0), min(lo + dims[axis], occupancy.shape[axis])
        if s1 <= s0:
            return out
        src.append(slice(s0, s1))
        dst.append(slice(s0 - lo, s1 - lo))
    out[tuple(dst)] = occupancy[tuple(src)]
    return out


def _crop_sparse(voxels: np.ndarray, offset: tuple[int, int, int], dims: tuple[int, int, int]) -> np.ndarray:
    out = np.zeros(dims, dtype=bool)
    if len(voxels) == 0:
        return out
    local = voxels - np.asarray(offset)
    keep = np.all((local >= 0) & (local < np.asarray(dims)), axis=1)
    local = local[keep]
    out[local[:, 0], local[:, 1], local[:, 2]] = True
    return out


def person_offset(spec: GridSpec, center_xy: tuple[int, int]) -> tuple[int, int, int]:
    """Parent index of person-volume voxel (0,0,0); local z=1 sits on the parent's ground_z."""
    half = PERSON_DIMS[0] // 2
    return (int(center_xy[0]) - half, int(center_xy[1]) - half, spec.ground_z - 1)


def thin_offset(hand_xy: tuple[int, int]) -> tuple[int, int, int]:
    half = THIN_DIMS[0] // 2
    return (int(hand_xy[0]) - half, int(hand_xy[1]) - half, 0)


def crop_person_volume(volume: OccupancyVolume, center_xy: tuple[int, int]) -> OccupancyVolume:
    offset = person_offset(volume.spec, center_xy)
    spec = volume.spec.sub_grid(offset, PERSON_DIMS, ground_z=1)
    return OccupancyVolume(spec, _crop_dense(volume.occupancy, offset, PERSON_DIMS))


def person_volume_from_voxels(frame: VoxelizedFrame, center_xy: tuple[int, int]) -> OccupancyVolume:
    """Same result as crop_person_volume(voxelize(frame)) without the room-sized grid."""
    offset = person_offset(frame.grid, center_xy)
    spec = frame.grid.sub_grid(offset, PERSON_DIMS, ground_z=1)
    return OccupancyVolume(spec, _crop_sparse(frame.voxels, offset, PERSON_DIMS))


def crop_thin_volume(person: OccupancyVolume, hand_xy: tuple[int, int]) -> OccupancyVolume:
    offset = thin_offset(hand_xy)
    dims = (THIN_DIMS[0], THIN_DIMS[1], person.dims[2])
    spec = person.spec.sub_grid(offset, dims)
    return OccupancyVolume(spec, _crop_dense(person.occupancy, offset, dims))


def points_in_person_volume(frame: VoxelizedFrame, center_xy: tuple[int, int]) -> np.ndarray:
    """Boolean mask over the frame's points that land inside the person volume at `center_xy`."""
    offset = np.asarray(person_offset(frame.grid, center_xy))
    local = frame.point_voxels - offset
    return frame.inside & np.all((local >= 0) & (local < np.asarray(PERSON_DIMS)), axis=1)
