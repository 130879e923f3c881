"""
Multi-view hand baseline.
- robust: voxel argmin of the truncated-L1 reprojection error against 2D keypoints
- lsq: unweighted least-squares intersection of the back-projected rays
Absent or behind-camera views contribute the truncation constant.
"""

import logging
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from pydantic import ValidationError
from scipy import ndimage

from volumetrack.exceptions import ConfigError, EmptyVolumeError
from volumetrack.models.camera import CameraModel, Keypoint2D
from volumetrack.models.volume import GridSpec, OccupancyVolume
from volumetrack.schemas.rig import CameraSpec, RigAdapter

logger = logging.getLogger(__name__)

SearchMode = Literal["occupied", "dilated"]


# ─── Cameras ──────────────────────────────────────────────────────────────────
def project_points(cam: CameraModel, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pixels (N, 2) and an in-front mask (N,); pixels of points with z_cam <= 0 are NaN."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    pc = p @ cam.rotation.T + cam.translation
    front = pc[:, 2] > 0
    uv = np.full((len(p), 2), np.nan)
    z = pc[front, 2]
    uv[front, 0] = cam.fx * pc[front, 0] / z + cam.cx
    uv[front, 1] = cam.fy * pc[front, 1] / z + cam.cy
    return uv, front


def project(cam: CameraModel, point: np.ndarray) -> tuple[float, float] | None:
    """Pixel of one world point, or None when it lies behind the camera."""
    uv, front = project_points(cam, point)
    return (float(uv[0, 0]), float(uv[0, 1])) if front[0] else None


def look_at_camera(
    position: Sequence[float],
    target: Sequence[float],
    fx: float = 600.0,
    fy: float = 600.0,
    width: int = 640,
    height: int = 480,
    up: Sequence[float] = (0.0, 0.0, 1.0),
) -> CameraModel:
    position = np.asarray(position, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - position
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    if np.linalg.norm(right) < 1e-9:
        raise ValueError("camera looks along the up vector")
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    rotation = np.stack([right, down, forward])
    return CameraModel(fx, fy, width / 2.0, height / 2.0, width, height, rotation, -rotation @ position)


def default_rig(center: Sequence[float], radius: float = 4.0, height: float = 2.5, target_z: float = 1.0, count: int = 4) -> list[CameraModel]:
    """`count` cameras on a circle around `center`, all aimed at the room center at `target_z`."""
    cx, cy = float(center[0]), float(center[1])
    cams = []
    for k in range(count):
        angle = np.pi / 4 + 2 * np.pi * k / count
        position = (cx + radius * np.cos(angle), cy + radius * np.sin(angle), height)
        cams.append(look_at_camera(position, (cx, cy, target_z)))
    return cams


def load_rig(path: Path) -> list[CameraModel]:
    try:
        specs = RigAdapter.validate_json(Path(path).read_bytes())
        return [s.to_camera() for s in specs]
    except (ValidationError, ValueError) as e:
        raise ConfigError(f"invalid camera rig {path}: {e}") from e


def save_rig(path: Path, cams: Sequence[CameraModel]) -> None:
    Path(path).write_bytes(RigAdapter.dump_json([CameraSpec.from_camera(c) for c in cams], indent=2))


# ─── Keypoints ────────────────────────────────────────────────────────────────
def synthesize_keypoints(
    cams: Sequence[CameraModel],
    world_point: np.ndarray,
    rng: np.random.Generator | None = None,
    noise_px: float = 0.0,
    outlier_rate: float = 0.0,
    outlier_px: float = 200.0,
    outlier_view: int | None = None,
) -> list[Keypoint2D]:
    """
    Ground-truth projections with optional Gaussian noise, clipped to the image.
    With probability `outlier_rate` one view is displaced by `outlier_px`: `outlier_view` when given
    and visible, otherwise a view drawn uniformly from the visible ones.
    """
    pixels: dict[int, tuple[float, float]] = {}
    for view, cam in enumerate(cams):
        uv = project(cam, world_point)
        if uv is None or not cam.contains(*uv):
            continue
        u, v = uv
        if rng is not None and noise_px > 0:
            u, v = u + rng.normal(0.0, noise_px), v + rng.normal(0.0, noise_px)
        pixels[view] = (u, v)

    if rng is not None and outlier_rate > 0 and pixels and rng.random() < outlier_rate:
        visible = sorted(pixels)
        view = outlier_view if outlier_view in pixels else visible[int(rng.integers(len(visible)))]
        angle = rng.uniform(0.0, 2 * np.pi)
        u, v = pixels[view]
        pixels[view] = (u + outlier_px * np.cos(angle), v + outlier_px * np.sin(angle))

    kps = []
    for view, cam in enumerate(cams):
        if view not in pixels:
            kps.append(Keypoint2D(view, present=False))
            continue
        u, v = pixels[view]
        kps.append(Keypoint2D(view, float(np.clip(u, 0.0, cam.width - 1e-6)), float(np.clip(v, 0.0, cam.height - 1e-6)), True))
    return kps


# ─── Triangulation ────────────────────────────────────────────────────────────
def reprojection_costs(
    points: np.ndarray, cams: Sequence[CameraModel], kps: Sequence[Keypoint2D], tau: float = 30.0
) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    by_view = {kp.view: kp for kp in kps}
    cost = np.zeros(len(points))
    for view, cam in enumerate(cams):
        kp = by_view.get(view)
        if kp is None or not kp.present:
            cost += tau
            continue
        uv, front = project_points(cam, points)
        l1 = np.abs(uv[:, 0] - kp.u) + np.abs(uv[:, 1] - kp.v)
        cost += np.where(front, np.minimum(l1, tau), tau)
    return cost


def robust_triangulate(
    person: OccupancyVolume,
    grid: GridSpec | None,
    cams: Sequence[CameraModel],
    kps: Sequence[Keypoint2D],
    tau: float = 30.0,
    search: SearchMode = "occupied",
    dilation: int = 3,
) -> tuple[int, int, int]:
    grid = grid or person.spec
    if not any(kp.present for kp in kps):
        raise ValueError("robust_triangulate needs at least one present keypoint")
    mask = person.occupancy
    if search == "dilated" and dilation > 0 and mask.any():
        mask = ndimage.binary_dilation(mask, structure=np.ones((3, 3, 3), dtype=bool), iterations=dilation)
    elif search not in ("occupied", "dilated"):
        raise ValueError(f"Unknown search mode: '{search}'")
    candidates = np.argwhere(mask)
    if len(candidates) == 0:
        raise EmptyVolumeError("person volume has no occupied voxels")
    cost = reprojection_costs(grid.voxel_to_world(candidates), cams, kps, tau)
    # np.argmin returns the first minimum; argwhere is lexicographic
    return tuple(int(c) for c in candidates[int(np.argmin(cost))])


def least_squares_triangulate(cams: Sequence[CameraModel], kps: Sequence[Keypoint2D]) -> np.ndarray:
    """World point minimizing the summed squared distance to every present keypoint's ray."""
    a = np.zeros((3, 3))
    b = np.zeros(3)
    used = 0
    for kp in kps:
        if not kp.present:
            continue
        cam = cams[kp.view]
        d = cam.rotation.T @ np.linalg.solve(cam.intrinsics, np.array([kp.u, kp.v, 1.0]))
        d /= np.linalg.norm(d)
        p = np.eye(3) - np.outer(d, d)
        a += p
        b += p @ cam.center
        used += 1
    if used < 2:
        raise ValueError(f"least squares needs at least two rays, got {used}")
    return np.linalg.solve(a, b)
