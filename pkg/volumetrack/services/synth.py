"""
Synthetic multi-person scenes with exact ground truth.
- forward kinematics of the capsule humanoid
- uniform-area surface sampling per primitive, Poisson counts, Gaussian noise, dropout
- one counter-based random stream per (seed, frame, primitive id)
- training patches for the detector and label images for the hand segmenters
- dataset directories: frames/frame_NNNNNN.pc4d, gt.jsonl, meta.json, script.json
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from pydantic import ValidationError

from volumetrack.exceptions import GroundTruthError, MissingFramesError, SceneScriptError
from volumetrack.models.detection import DETECTOR_SIZE
from volumetrack.models.features import SIDE_DIRECTIONS
from volumetrack.models.hands import HANDS, TOP_VIEW, ViewKey
from volumetrack.models.humanoid import (
    ARM_RADIUS,
    FOOT_LENGTH,
    FOOT_RADIUS,
    FOREARM,
    HAND_RADIUS,
    HEAD_HEIGHT,
    HEAD_RADIUS,
    HIP_OFFSET,
    LEG_LENGTH,
    LEG_RADIUS,
    POSES,
    SHOULDER_HEIGHT,
    SHOULDER_OFFSET,
    TORSO_BOTTOM,
    TORSO_RADIUS,
    TORSO_TOP,
    UPPER_ARM,
    ArmPose,
    Box,
    Capsule,
    Cylinder,
    HumanoidModel,
    Primitive,
    Skeleton,
    Sphere,
)
from volumetrack.models.volume import PERSON_DIMS, GridSpec, PointFrame
from volumetrack.schemas.ground_truth import FrameTruth, HandTruth, PersonTruth
from volumetrack.schemas.scene import DatasetMeta, PersonScript, SceneScript
from volumetrack.services.hands import OracleSegmenter, lower_median
from volumetrack.services.projection import extract_patch, feature_maps_from_voxels, side_views
from volumetrack.services.volume import (
    crop_thin_volume,
    person_offset,
    person_volume_from_voxels,
    quantize_frame,
)
from volumetrack.utils.pointcloud_io import read_pc4d, write_pc4d
from volumetrack.utils.seeding import keyed_rng

logger = logging.getLogger(__name__)

GRID_FLOOR_Z = -0.03  # floor plane lands in voxel 1
PRIMITIVES_PER_PERSON = 32
CLUTTER_ID_BASE = 10_000
FLOOR_ID = 20_000
SCRIPT_ID_BASE = 1_000_000
WALK_RATIO = 1.37


# ─── Forward kinematics ───────────────────────────────────────────────────────
def _rz(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def arm_directions(pose: ArmPose, side: str) -> tuple[np.ndarray, np.ndarray]:
    """Body-frame unit directions of the upper arm and forearm."""
    s = 1.0 if side == "left" else -1.0
    a, e, f = pose.azimuth, pose.elevation, pose.flexion
    upper = np.array([math.sin(e) * math.sin(a), s * math.sin(e) * math.cos(a), -math.cos(e)])
    forward = np.array([1.0, 0.0, 0.0])
    w = forward - (forward @ upper) * upper
    if np.linalg.norm(w) < 1e-9:
        up = np.array([0.0, 0.0, 1.0])
        w = up - (up @ upper) * upper
    w /= np.linalg.norm(w)
    return upper, math.cos(f) * upper + math.sin(f) * w


def forward_kinematics(model: HumanoidModel) -> Skeleton:
    k = model.height_scale
    rot = _rz(model.heading)
    base = np.array([model.x, model.y, 0.0])

    def world(p) -> np.ndarray:
        return base + rot @ (k * np.asarray(p, dtype=np.float64))

    prims: list[Primitive] = [
        Capsule(world((0, 0, TORSO_BOTTOM)), world((0, 0, TORSO_TOP)), k * TORSO_RADIUS, "torso"),
        Sphere(world((0, 0, HEAD_HEIGHT)), k * HEAD_RADIUS, "head"),
    ]
    shoulders, elbows, hands = {}, {}, {}
    for side in HANDS:
        s = 1.0 if side == "left" else -1.0
        hip = np.array([0.0, s * HIP_OFFSET, LEG_LENGTH])
        ankle = np.array([0.0, s * HIP_OFFSET, FOOT_RADIUS])
        prims.append(Capsule(world(hip), world(ankle), k * LEG_RADIUS, f"{side}_leg"))
        prims.append(Capsule(world(ankle), world(ankle + (FOOT_LENGTH, 0, 0)), k * FOOT_RADIUS, f"{side}_foot"))

        upper, fore = arm_directions(model.arm(side), side)
        shoulder = np.array([0.0, s * SHOULDER_OFFSET, SHOULDER_HEIGHT])
        elbow = shoulder + UPPER_ARM * upper
        hand = elbow + FOREARM * fore
        shoulders[side], elbows[side], hands[side] = world(shoulder), world(elbow), world(hand)
        prims.append(Capsule(shoulders[side], elbows[side], k * ARM_RADIUS, f"{side}_upper_arm"))
        prims.append(Capsule(elbows[side], hands[side], k * ARM_RADIUS, f"{side}_forearm"))
        prims.append(Sphere(hands[side], k * HAND_RADIUS, f"{side}_hand"))
    return Skeleton(prims, shoulders, elbows, hands)


# ─── Surface sampling ─────────────────────────────────────────────────────────
def _unit_vectors(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return v / norms


def _perpendicular_basis(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(axis, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(axis, u)


def sample_surface(prim: Primitive, n: int, rng: np.random.Generator) -> np.ndarray:
    """`n` points uniformly distributed over the primitive's surface area."""
    if n == 0:
        return np.zeros((0, 3))
    if isinstance(prim, Sphere):
        return prim.center + prim.radius * _unit_vectors(rng, n)
    if isinstance(prim, Capsule):
        a, b = np.asarray(prim.a), np.asarray(prim.b)
        length = prim.length
        side_share = 2.0 * math.pi * prim.radius * length / prim.area
        on_side = rng.random(n) < side_share
        out = np.empty((n, 3))
        axis = (b - a) / length if length > 0 else np.array([0.0, 0.0, 1.0])
        n_side = int(on_side.sum())
        u, v = _perpendicular_basis(axis)
        t = rng.random(n_side) * length
        phi = rng.random(n_side) * 2.0 * math.pi
        out[on_side] = a + np.outer(t, axis) + prim.radius * (np.outer(np.cos(phi), u) + np.outer(np.sin(phi), v))
        dirs = _unit_vectors(rng, n - n_side)
        ends = np.where((dirs @ axis)[:, None] >= 0, b, a)
        out[~on_side] = ends + prim.radius * dirs
        return out
    if isinstance(prim, Box):
        size = np.asarray(prim.size, dtype=np.float64)
        normals = (2, 2, 0, 0, 1, 1)
        areas = np.array([np.prod(np.delete(size, ax)) for ax in normals])
        face = rng.choice(6, size=n, p=areas / areas.sum())
        local = rng.random((n, 3)) * size
        for f, ax in enumerate(normals):
            local[face == f, ax] = (f % 2) * size[ax]
        return np.asarray(prim.center) + local - np.array([size[0] / 2, size[1] / 2, 0.0])
    if isinstance(prim, Cylinder):
        side = 2.0 * math.pi * prim.radius * prim.height
        disk = math.pi * prim.radius**2
        part = rng.choice(3, size=n, p=np.array([side, disk, disk]) / (side + 2 * disk))
        phi = rng.random(n) * 2.0 * math.pi
        r = np.where(part == 0, prim.radius, prim.radius * np.sqrt(rng.random(n)))
        z = np.where(part == 0, rng.random(n) * prim.height, np.where(part == 1, 0.0, prim.height))
        return np.asarray(prim.center) + np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    raise TypeError(f"unsupported primitive {type(prim).__name__}")


# ─── Scripts ──────────────────────────────────────────────────────────────────
def load_script(path: Path) -> SceneScript:
    try:
        return SceneScript.model_validate_json(Path(path).read_bytes())
    except ValidationError as e:
        keys = sorted({".".join(str(p) for p in err["loc"]) for err in e.errors()})
        raise SceneScriptError(f"invalid scene script {path}: offending keys {keys}: {e}") from e
    except OSError as e:
        raise SceneScriptError(f"cannot read scene script {path}: {e}") from e


def room_grid(script: SceneScript) -> GridSpec:
    dims = (math.ceil(script.room[0] / script.voxel_size), math.ceil(script.room[1] / script.voxel_size), script.height_voxels)
    return GridSpec((0.0, 0.0, GRID_FLOOR_Z), script.voxel_size, dims, ground_z=1)


def _smoothstep(t: float) -> float:
    return t * t * (3.0 - 2.0 * t)


def _blend(a: ArmPose, b: ArmPose, t: float) -> ArmPose:
    return ArmPose(*(x + (y - x) * t for x, y in zip((a.azimuth, a.elevation, a.flexion), (b.azimuth, b.elevation, b.flexion))))


def person_at(script: SceneScript, index: int, frame: int) -> HumanoidModel:
    """Pose of scripted person `index` at `frame`: bounded walk around the anchor plus a smooth pose schedule."""
    p: PersonScript = script.people[index]
    phases = keyed_rng(script.seed, SCRIPT_ID_BASE + index).uniform(0.0, 2.0 * math.pi, size=6)
    w = 2.0 * math.pi * frame / p.walk_period
    x = p.anchor[0] + p.walk_radius * math.sin(w + phases[0])
    y = p.anchor[1] + p.walk_radius * math.sin(w / WALK_RATIO + phases[1])
    heading = p.heading + 0.3 * math.sin(w / 2.0 + phases[2])

    slot, within = divmod(frame, p.pose_period)
    current = p.poses[slot % len(p.poses)]
    upcoming = p.poses[(slot + 1) % len(p.poses)]
    t = _smoothstep(within / p.pose_period)
    arms = []
    for k, side in enumerate(HANDS):
        pose = _blend(POSES[current][k], POSES[upcoming][k], t)
        jitter = p.pose_jitter * math.sin(w * 3.0 + phases[3 + k])
        flex = pose.flexion + jitter
        if current == "waving" and side == "right":
            flex += 0.6 * math.sin(2.0 * math.pi * frame / 20.0)
        arms.append(ArmPose(pose.azimuth, max(pose.elevation + jitter, 0.0), max(flex, 0.0)))
    return HumanoidModel(x, y, heading, arms[0], arms[1], p.height_scale)


def validate_script(script: SceneScript) -> None:
    """Rejects people leaving the room, hands leaving the person volume, or people closer than min_separation."""
    w, d = script.room
    grid = room_grid(script)
    for t in range(script.frames):
        models = [person_at(script, i, t) for i in range(len(script.people))]
        roots = [(m.x, m.y) for m in models]
        for i, (x, y) in enumerate(roots):
            if not (0.0 <= x < w and 0.0 <= y < d):
                raise SceneScriptError(f"person {script.people[i].id} leaves the room at frame {t}")
            root_xy = grid.world_to_voxel(np.array([x, y, 0.0]))[:2]
            offset = np.asarray(person_offset(grid, tuple(int(c) for c in root_xy)))
            for side, center in forward_kinematics(models[i]).hands.items():
                local = grid.world_to_voxel(center) - offset
                if np.any(local < 0) or np.any(local >= np.asarray(PERSON_DIMS)):
                    raise SceneScriptError(
                        f"person {script.people[i].id} {side} hand leaves the person volume at frame {t}; lower height_scale"
                    )
        if script.allow_close:
            continue
        for i in range(len(roots)):
            for j in range(i + 1, len(roots)):
                gap = math.dist(roots[i], roots[j])
                if gap < script.min_separation:
                    raise SceneScriptError(
                        f"people {script.people[i].id} and {script.people[j].id} come {gap:.3f} m apart at frame {t} "
                        f"(min_separation {script.min_separation}); set allow_close to permit"
                    )


# ─── Frames ───────────────────────────────────────────────────────────────────
def _clutter_primitive(item) -> Primitive:
    base = np.array([item.center[0], item.center[1], 0.0])
    if item.kind == "box":
        return Box(base, np.asarray(item.size, dtype=np.float64), "box")
    return Cylinder(base, item.size[0], item.size[2], "cylinder")


def _emit(prim: Primitive, stream: int, script: SceneScript, frame: int) -> np.ndarray:
    rng = keyed_rng(script.seed, frame, stream)
    n = int(rng.poisson(script.density * prim.area)) if script.density > 0 else 0
    pts = sample_surface(prim, n, rng)
    if script.noise > 0 and n:
        pts = pts + rng.normal(0.0, script.noise, size=pts.shape)
    keep = rng.random(n) < script.keep_prob
    return pts[keep]


def sample_scene(script: SceneScript, frame: int) -> tuple[PointFrame, FrameTruth]:
    if not 0 <= frame < script.frames:
        raise ValueError(f"frame {frame} outside [0, {script.frames})")
    grid = room_grid(script)
    chunks: list[np.ndarray] = []
    colors: list[np.ndarray] = []
    count = 0
    people = []

    for index, p in enumerate(script.people):
        model = person_at(script, index, frame)
        skeleton = forward_kinematics(model)
        hand_points: dict[str, list[int]] = {h: [] for h in HANDS}
        for k, prim in enumerate(skeleton.primitives):
            pts = _emit(prim, index * PRIMITIVES_PER_PERSON + k, script, frame)
            if prim.name.endswith("_hand"):
                hand_points[prim.name[: -len("_hand")]] = list(range(count, count + len(pts)))
            chunks.append(pts)
            colors.append(np.tile(np.asarray(p.color, dtype=np.uint8), (len(pts), 1)))
            count += len(pts)
        people.append((p, model, skeleton, hand_points))

    for c, item in enumerate(script.clutter):
        pts = _emit(_clutter_primitive(item), CLUTTER_ID_BASE + c, script, frame)
        chunks.append(pts)
        colors.append(np.tile(np.asarray(item.color, dtype=np.uint8), (len(pts), 1)))
        count += len(pts)

    if script.floor:
        rng = keyed_rng(script.seed, frame, FLOOR_ID)
        n = int(rng.poisson(script.density * script.room[0] * script.room[1]))
        pts = np.column_stack([rng.random(n) * script.room[0], rng.random(n) * script.room[1], np.zeros(n)])
        if script.noise > 0:
            pts[:, 2] += rng.normal(0.0, script.noise, size=n)
        pts = pts[rng.random(n) < script.keep_prob]
        chunks.append(pts)
        colors.append(np.full((len(pts), 3), 90, dtype=np.uint8))

    # frames are stored as float32; ground truth is quantized from the stored values
    points = (np.concatenate(chunks) if chunks else np.zeros((0, 3))).astype(np.float32).astype(np.float64)
    rgb = np.concatenate(colors) if colors else np.zeros((0, 3), dtype=np.uint8)
    cloud = PointFrame(frame, points, rgb)

    truths = []
    for p, model, skeleton, hand_points in people:
        root_world = (model.x, model.y)
        root_xy = tuple(int(v) for v in grid.world_to_voxel(np.array([root_world[0], root_world[1], 0.0]))[:2])
        offset = person_offset(grid, root_xy)
        hands = {}
        for side in HANDS:
            center = skeleton.hands[side]
            local = grid.world_to_voxel(center) - np.asarray(offset)
            idx = hand_points[side]
            vox = grid.world_to_voxel(points[idx]) - np.asarray(offset) if idx else np.zeros((0, 3), dtype=np.int64)
            vox = vox[np.all((vox >= 0) & (vox < np.asarray(PERSON_DIMS)), axis=1)]
            median = tuple(lower_median(vox[:, a]) for a in range(3)) if len(vox) else None
            hands[side] = HandTruth(
                center_world=tuple(float(c) for c in center),
                voxel=tuple(int(c) for c in local),
                median_voxel=median,
                point_indices=idx,
                voxels=[tuple(int(c) for c in v) for v in np.unique(vox, axis=0)],
            )
        truths.append(
            PersonTruth(
                id=p.id,
                root_xy=root_xy,
                root_world=(float(root_world[0]), float(root_world[1])),
                volume_offset=offset,
                left=hands["left"],
                right=hands["right"],
            )
        )
    return cloud, FrameTruth(frame=frame, people=truths)


# ─── Datasets ─────────────────────────────────────────────────────────────────
def frame_path(dataset_dir: Path, frame: int) -> Path:
    return Path(dataset_dir) / "frames" / f"frame_{frame:06d}.pc4d"


def dataset_meta(script: SceneScript) -> DatasetMeta:
    grid = room_grid(script)
    return DatasetMeta(
        frames=script.frames,
        seed=script.seed,
        grid_origin=grid.origin,
        voxel_size=grid.voxel_size,
        grid_dims=grid.dims,
        ground_z=grid.ground_z,
        people=[p.id for p in script.people],
    )


def write_dataset(script: SceneScript, out_dir: Path) -> DatasetMeta:
    validate_script(script)
    out_dir = Path(out_dir)
    (out_dir / "frames").mkdir(parents=True, exist_ok=True)
    with (out_dir / "gt.jsonl").open("w") as gt_file:
        for t in range(script.frames):
            cloud, truth = sample_scene(script, t)
            write_pc4d(frame_path(out_dir, t), cloud)
            gt_file.write(truth.model_dump_json() + "\n")
    meta = dataset_meta(script)
    (out_dir / "meta.json").write_text(meta.model_dump_json(indent=2))
    (out_dir / "script.json").write_text(script.model_dump_json(indent=2))
    logger.info("wrote %d frames, %d people to %s", script.frames, len(script.people), out_dir)
    return meta


def load_meta(dataset_dir: Path) -> DatasetMeta:
    path = Path(dataset_dir) / "meta.json"
    try:
        return DatasetMeta.model_validate_json(path.read_bytes())
    except (OSError, ValidationError) as e:
        raise GroundTruthError(f"cannot read dataset meta {path}: {e}") from e


def meta_grid(meta: DatasetMeta) -> GridSpec:
    return GridSpec(meta.grid_origin, meta.voxel_size, meta.grid_dims, meta.ground_z)


def list_frames(dataset_dir: Path) -> list[Path]:
    """Frame files in index order; raises MissingFramesError on gaps, including frames missing past the last file."""
    files = sorted((Path(dataset_dir) / "frames").glob("frame_*.pc4d"))
    indices = [int(f.stem.split("_")[1]) for f in files]
    expected = indices[-1] + 1 if indices else 0
    if (Path(dataset_dir) / "meta.json").exists():
        expected = max(expected, load_meta(dataset_dir).frames)
    gaps = sorted(set(range(expected)) - set(indices))
    if gaps:
        raise MissingFramesError(gaps)
    return files


def iter_frames(dataset_dir: Path) -> Iterator[PointFrame]:
    for t, path in enumerate(list_frames(dataset_dir)):
        yield read_pc4d(path, t)


def read_ground_truth(path: Path) -> dict[int, FrameTruth]:
    truths = {}
    try:
        with Path(path).open() as fh:
            for lineno, line in enumerate(fh, start=1):
                if line.strip():
                    truth = FrameTruth.model_validate_json(line)
                    truths[truth.frame] = truth
    except OSError as e:
        raise GroundTruthError(f"cannot read ground truth {path}: {e}") from e
    except ValidationError as e:
        raise GroundTruthError(f"{path}:{lineno}: {e}") from e
    return truths


# ─── Training sets ────────────────────────────────────────────────────────────
@dataclass
class TrainingSet:
    f_t: np.ndarray  # (K, 51, 51) normalized top-down patches
    stacked: np.ndarray  # (K, 51, 51, 3)
    labels: np.ndarray  # (K,) +1 person, -1 background
    identities: np.ndarray  # (K,) scripted person id, -1 for background
    frames: np.ndarray  # (K,)
    hand_images: list[np.ndarray] = field(default_factory=list)
    hand_labels: list[np.ndarray] = field(default_factory=list)
    hand_modes: list[str] = field(default_factory=list)


def _rotations(image: np.ndarray, augment: bool) -> list[np.ndarray]:
    return [np.rot90(image, k, axes=(0, 1)).copy() for k in (range(4) if augment else range(1))]


def make_training_set(
    frames: Iterator[tuple[PointFrame, FrameTruth]],
    grid: GridSpec,
    seed: int = 0,
    negatives_per_frame: int = 4,
    min_negative_distance: int = 20,
    augment: bool = False,
    hand_views: bool = True,
) -> TrainingSet:
    f_ts, stacks, labels, ids, frame_ids = [], [], [], [], []
    hand_images, hand_labels, hand_modes = [], [], []
    oracle = OracleSegmenter()

    def add(maps, xy, label, identity, frame):
        for patch in _rotations(extract_patch(maps.stacked, xy, DETECTOR_SIZE), augment):
            stacks.append(patch)
            f_ts.append(patch[..., 0])
            labels.append(label)
            ids.append(identity)
            frame_ids.append(frame)

    for cloud, truth in frames:
        vf = quantize_frame(cloud, grid)
        maps = feature_maps_from_voxels(vf)
        roots = np.array([p.root_xy for p in truth.people], dtype=np.int64).reshape(-1, 2)
        for person in truth.people:
            add(maps, person.root_xy, 1, person.id, truth.frame)

        rng = keyed_rng(seed, truth.frame)
        occupied = np.argwhere(maps.f_t > 0)
        uniform = np.column_stack([rng.integers(0, grid.dims[0], 4 * negatives_per_frame),
                                   rng.integers(0, grid.dims[1], 4 * negatives_per_frame)])
        pools = [occupied[rng.permutation(len(occupied))] if len(occupied) else occupied, uniform]
        taken = 0
        for k, pool in enumerate(pools):
            quota = negatives_per_frame // 2 if k == 0 else negatives_per_frame - taken
            used = 0
            for xy in pool:
                if used >= quota:
                    break
                if len(roots) and np.abs(roots - xy).max(axis=1).min() <= min_negative_distance:
                    continue
                add(maps, tuple(int(c) for c in xy), -1, -1, truth.frame)
                used += 1
            taken += used

        if not hand_views:
            continue
        for person in truth.people:
            person_vol = person_volume_from_voxels(vf, person.root_xy)
            patch = extract_patch(maps.stacked, person.root_xy, PERSON_DIMS[0])
            oracle.set_ground_truth({h: np.asarray(person.hand(h).voxels).reshape(-1, 3) for h in HANDS}, truth.frame, person.id)
            top = oracle.label(patch, "topdown", TOP_VIEW)
            for img, lab in zip(_rotations(patch, augment), _rotations(top, augment)):
                hand_images.append(img)
                hand_labels.append(lab)
                hand_modes.append("topdown")
            for side in HANDS:
                xy = person.hand(side).voxel[:2]
                views = side_views(crop_thin_volume(person_vol, xy))
                for d in SIDE_DIRECTIONS:
                    hand_images.append(views[d])
                    hand_labels.append(oracle.label(views[d], "side", ViewKey(side, d, xy)))
                    hand_modes.append("side")

    if not labels:
        raise GroundTruthError("no training examples could be drawn from the dataset")
    logger.info("training set: %d positive, %d negative patches", labels.count(1), labels.count(-1))
    return TrainingSet(
        np.asarray(f_ts, dtype=np.float64),
        np.asarray(stacks, dtype=np.float64),
        np.asarray(labels, dtype=np.int64),
        np.asarray(ids, dtype=np.int64),
        np.asarray(frame_ids, dtype=np.int64),
        hand_images,
        hand_labels,
        hand_modes,
    )
