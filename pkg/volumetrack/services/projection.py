"""
2D views of occupancy volumes.
- f_t: max_z occupancy * (z + 1)
- f_s: sum_z occupancy
- f_b: max_z occupancy * (N_z - z) over z > ground_z
- stacked: (f_t, f_s, f_b) / N_z, clamped to [0, 1]
- side views of thin volumes: (near, sum, far) per ray, normalized by the ray length
"""

import numpy as np

from volumetrack.exceptions import ShapeMismatchError
from volumetrack.models.features import SIDE_DIRECTIONS, FeatureMaps, SideViewSet
from volumetrack.models.volume import THIN_DIMS, OccupancyVolume, VoxelizedFrame


def top_down(volume: OccupancyVolume) -> np.ndarray:
    occ = volume.occupancy
    z = np.arange(1, occ.shape[2] + 1, dtype=np.int32)
    return (occ * z).max(axis=2).astype(np.int32)


def column_sum(volume: OccupancyVolume) -> np.ndarray:
    return volume.occupancy.sum(axis=2, dtype=np.int32)


def bottom_up(volume: OccupancyVolume, ground_z: int) -> np.ndarray:
    occ = volume.occupancy
    n_z = occ.shape[2]
    inverted = (n_z - np.arange(n_z, dtype=np.int32))
    inverted[: ground_z + 1] = 0
    return (occ * inverted).max(axis=2).astype(np.int32)


def stack_features(f_t: np.ndarray, f_s: np.ndarray, f_b: np.ndarray, n_z: int) -> np.ndarray:
    if not (f_t.shape == f_s.shape == f_b.shape):
        raise ShapeMismatchError(f"feature maps differ in shape: {f_t.shape}, {f_s.shape}, {f_b.shape}")
    stacked = np.stack([f_t, f_s, f_b], axis=-1).astype(np.float32) / np.float32(n_z)
    return np.clip(stacked, 0.0, 1.0)


def compute_feature_maps(volume: OccupancyVolume, ground_z: int | None = None) -> FeatureMaps:
    ground_z = volume.spec.ground_z if ground_z is None else ground_z
    n_z = volume.dims[2]
    f_t, f_s, f_b = top_down(volume), column_sum(volume), bottom_up(volume, ground_z)
    return FeatureMaps(f_t, f_s, f_b, n_z, stack_features(f_t, f_s, f_b, n_z))


def feature_maps_from_voxels(frame: VoxelizedFrame) -> FeatureMaps:
    """Feature maps straight from the distinct voxel set, identical to compute_feature_maps(voxelize(...))."""
    n_x, n_y, n_z = frame.grid.dims
    f_t = np.zeros((n_x, n_y), dtype=np.int32)
    f_s = np.zeros((n_x, n_y), dtype=np.int32)
    f_b = np.zeros((n_x, n_y), dtype=np.int32)
    v = frame.voxels
    if len(v):
        ix, iy, iz = v[:, 0], v[:, 1], v[:, 2]
        np.maximum.at(f_t, (ix, iy), (iz + 1).astype(np.int32))
        np.add.at(f_s, (ix, iy), 1)
        above = iz > frame.grid.ground_z
        np.maximum.at(f_b, (ix[above], iy[above]), (n_z - iz[above]).astype(np.int32))
    return FeatureMaps(f_t, f_s, f_b, n_z, stack_features(f_t, f_s, f_b, n_z))


def extract_patch(image: np.ndarray, center: tuple[int, int], size: int) -> np.ndarray:
    """size x size window whose local index size // 2 sits on `center`; zero outside the map."""
    if size < 1:
        raise ValueError(f"patch size must be >= 1, got {size}")
    half = size // 2
    out = np.zeros((size, size) + image.shape[2:], dtype=image.dtype)
    x0, y0 = int(center[0]) - half, int(center[1]) - half
    sx0, sx1 = max(x0, 0), min(x0 + size, image.shape[0])
    sy0, sy1 = max(y0, 0), min(y0 + size, image.shape[1])
    if sx1 > sx0 and sy1 > sy0:
        out[sx0 - x0 : sx1 - x0, sy0 - y0 : sy1 - y0] = image[sx0:sx1, sy0:sy1]
    return out


def _ray_channels(occ: np.ndarray) -> np.ndarray:
    """Rays run along axis 0 starting at index 0 (the near face)."""
    depth = occ.shape[0]
    hit = occ.any(axis=0)
    near_d = occ.argmax(axis=0)
    far_d = depth - 1 - occ[::-1].argmax(axis=0)
    near = np.where(hit, (depth - near_d) / depth, 0.0)
    far = np.where(hit, (depth - far_d) / depth, 0.0)
    ray_sum = occ.sum(axis=0) / depth
    return np.stack([near, ray_sum, far], axis=-1).astype(np.float32)


def side_views(thin: OccupancyVolume) -> SideViewSet:
    occ = thin.occupancy
    if occ.shape[:2] != THIN_DIMS[:2]:
        raise ShapeMismatchError(f"thin volume must be 41x41xN_z, got {occ.shape}")
    # +x looks from the x = 40 face toward -x; transverse axis is y (x for the y views), unflipped
    views = {
        "+x": _ray_channels(occ[::-1]),
        "-x": _ray_channels(occ),
        "+y": _ray_channels(np.transpose(occ, (1, 0, 2))[::-1]),
        "-y": _ray_channels(np.transpose(occ, (1, 0, 2))),
    }
    return SideViewSet({d: views[d] for d in SIDE_DIRECTIONS})
