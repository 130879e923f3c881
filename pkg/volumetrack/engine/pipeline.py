"""
Per-frame tracking + hand localization.

frame -> align -> quantize -> f_t/f_s/f_b -> linear proposals -> verification
      -> appearance descriptors -> tracker step -> per-person hand localization -> PersonResult
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from volumetrack.config import RunConfig
from volumetrack.exceptions import ConfigError, GroundTruthError
from volumetrack.models.detection import DETECTOR_SIZE, LinearDetector
from volumetrack.models.features import FeatureMaps
from volumetrack.models.hands import HANDS, HandEstimate
from volumetrack.models.tracking import TrackedPerson, TrackerConfig
from volumetrack.models.volume import PERSON_DIMS, GridSpec, PointFrame, VoxelizedFrame
from volumetrack.schemas.ground_truth import FrameTruth, PersonTruth
from volumetrack.schemas.results import HandResult, PersonResult
from volumetrack.services import detection, hands, tracking
from volumetrack.services.evaluation import associate
from volumetrack.services.projection import extract_patch, feature_maps_from_voxels
from volumetrack.services.volume import (
    align_frame,
    person_offset,
    person_volume_from_voxels,
    points_in_person_volume,
    quantize_frame,
)
from volumetrack.utils import model_io

logger = logging.getLogger(__name__)

STAGES = ("voxelize", "features", "detect", "verify", "track", "hands")


def build_detector(config: RunConfig) -> tuple[LinearDetector, str]:
    if config.detector_path is None:
        logger.info("no detector model configured, using the bell template prior")
        return detection.bell_template_detector(), "bell_prior"
    return model_io.load_detector(config.detector_path), str(config.detector_path)


def build_verifier(config: RunConfig) -> detection.BaseVerifier:
    if config.verifier == "logistic":
        if config.verifier_path is None:
            raise ConfigError("verifier = logistic requires verifier_path")
        return detection.get_verifier("logistic", config.verifier_path)
    return detection.get_verifier("oracle", radius=config.oracle_radius, miss_prob=config.oracle_miss_prob)


def tracker_config(config: RunConfig) -> TrackerConfig:
    return TrackerConfig(
        gate_radius=config.gate_radius,
        max_edges=config.max_edges,
        weights=(config.lambda_d, config.lambda_a, config.lambda_p),
        tau_kill=config.tau_kill,
        probation=config.probation,
        lk_window=config.lk_window,
        lk_iters=config.lk_iters,
        lk_sigma=config.lk_sigma,
        matching_dump=config.matching_dump,
    )


def hand_result(grid: GridSpec, offset: tuple[int, int, int], estimate: HandEstimate, side: str) -> HandResult:
    point = estimate[side]
    room = tuple(int(a + b) for a, b in zip(point.xyz, offset))
    world = tuple(float(c) for c in grid.voxel_to_world(room))
    return HandResult(local=point.xyz, room=room, world=world, missing=point.missing)


@dataclass
class FrameOutput:
    results: list[PersonResult]
    reported: list[TrackedPerson]
    features: FeatureMaps
    stage_ms: dict[str, float] = field(default_factory=dict)
    localize_ms: list[float] = field(default_factory=list)


class FramePipeline:
    """Stateful across frames through its tracker; everything else is per-frame."""

    def __init__(self, config: RunConfig, grid: GridSpec, threads: int = 1, method: str = "decomposition"):
        self.config = config
        self.grid = grid
        self.threads = max(1, threads)
        self.method = method
        self.detector, self.detector_source = build_detector(config)
        self.verifier = build_verifier(config)
        self.tracker = tracking.Tracker(tracker_config(config), threads=self.threads)
        self.rotation = np.asarray(config.align_rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(config.align_translation, dtype=np.float64)

    def _segmenter_for(self, truth: Optional[FrameTruth], xy: tuple[int, int], frame: int) -> hands.Segmenter2D:
        kind = self.config.segmenter
        if kind != "oracle":
            return hands.get_segmenter(kind)
        if truth is None:
            raise GroundTruthError(f"segmenter = oracle needs ground truth for frame {frame}")
        people = truth.people
        pairs = associate([xy], [p.root_xy for p in people], self.config.gt_gate)
        if not pairs:
            return hands.NullSegmenter()
        person: PersonTruth = people[pairs[0][1]]
        shift = np.asarray(person.volume_offset) - np.asarray(person_offset(self.grid, xy))
        seg = hands.OracleSegmenter(self.config.flip_rate, self.config.wipe_prob, self.config.seed)
        seg.set_ground_truth(
            {h: np.asarray(person.hand(h).voxels, dtype=np.int64).reshape(-1, 3) + shift for h in HANDS},
            frame,
            person.id,
        )
        return seg

    def _descriptors(self, vf: VoxelizedFrame, cloud: PointFrame, proposals) -> list:
        out = []
        for p in proposals:
            volume = person_volume_from_voxels(vf, p.xy)
            colors = None
            if self.config.appearance == "color":
                if cloud.colors is None:
                    raise ConfigError("appearance = color needs frames with per-point colors")
                colors = cloud.colors[points_in_person_volume(vf, p.xy)]
            out.append(tracking.appearance_descriptor(volume, colors))
        return out

    def process(self, cloud: PointFrame, truth: Optional[FrameTruth] = None) -> FrameOutput:
        ms: dict[str, float] = {}
        clock = time.perf_counter()

        def lap(stage: str) -> None:
            nonlocal clock
            now = time.perf_counter()
            ms[stage] = (now - clock) * 1000.0
            clock = now

        frame = cloud.timestamp_index
        aligned = align_frame(cloud, self.rotation, self.translation)
        vf = quantize_frame(aligned, self.grid)
        lap("voxelize")
        maps = feature_maps_from_voxels(vf)
        lap("features")
        score_map = detection.linear_score_map(maps.f_t_normalized, self.detector)
        proposals = detection.propose(score_map, self.detector)
        lap("detect")
        if isinstance(self.verifier, detection.OracleVerifier):
            if truth is None:
                raise GroundTruthError(f"verifier = oracle needs ground truth for frame {frame}")
            self.verifier.set_ground_truth(np.array([p.root_xy for p in truth.people]).reshape(-1, 2))
        verified = detection.verify(maps.stacked, proposals, self.verifier, self.config.p_min)
        lap("verify")

        def rescore(xy: tuple[int, int]) -> float:
            return self.verifier.score(extract_patch(maps.stacked, xy, DETECTOR_SIZE), xy)

        reported = self.tracker.step(maps, verified, self._descriptors(vf, aligned, verified), rescore)
        lap("track")
        logger.debug("frame %d: %d proposals, %d reported tracks", frame, len(proposals), len(reported))

        def localize(t: TrackedPerson) -> tuple[PersonResult, float]:
            started = time.perf_counter()
            seg = self._segmenter_for(truth, t.xy, frame)
            person = person_volume_from_voxels(vf, t.xy)
            patch = extract_patch(maps.stacked, t.xy, PERSON_DIMS[0])
            estimate = hands.localize_hands(person, patch, seg)
            elapsed = (time.perf_counter() - started) * 1000.0
            offset = person_offset(self.grid, t.xy)
            for side in HANDS:
                if estimate[side].missing:
                    logger.warning("frame %d track %d: %s hand falls back to the volume center", frame, t.id, side)
            result = PersonResult(
                frame=frame,
                track_id=t.id,
                method=self.method,
                center=t.xy,
                person_score=t.person_score,
                left=hand_result(self.grid, offset, estimate, "left"),
                right=hand_result(self.grid, offset, estimate, "right"),
                predicted=t.predicted,
            )
            return result, elapsed

        if self.threads > 1 and len(reported) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                done = list(pool.map(localize, reported))
        else:
            done = [localize(t) for t in reported]
        lap("hands")
        return FrameOutput([r for r, _ in done], reported, maps, ms, [e for _, e in done])
