"""
Trajectory lifecycle over per-frame people candidates.
- predict: Lucas-Kanade on the smoothed f_t map from the last position, motion vector fallback
- associate: max-covering assignment (services.matching)
- matched: extend, update appearance / velocity / score
- unmatched: coast on the prediction, re-verify there, appearance frozen
- unmatched candidates start trajectories; low aggregate score kills
"""

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy import ndimage

from volumetrack.exceptions import DescriptorKindError
from volumetrack.models.detection import Proposal
from volumetrack.models.features import FeatureMaps
from volumetrack.models.tracking import (
    Descriptor,
    FlowResult,
    HistoryEntry,
    TrackedPerson,
    Trajectory,
    TrackerConfig,
    TrackerState,
)
from volumetrack.models.volume import OccupancyVolume
from volumetrack.schemas.results import TrackLogRecord
from volumetrack.services.matching import build_problem, dump_problem, solve

logger = logging.getLogger(__name__)

HEIGHT_BAND = 5
COLOR_BINS = 8
CONDITION_LIMIT = 1e6


# ─── Appearance ───────────────────────────────────────────────────────────────
def appearance_descriptor(volume: OccupancyVolume, colors: np.ndarray | None = None) -> Descriptor:
    if colors is not None:
        c = np.asarray(colors, dtype=np.uint8).reshape(-1, 3).astype(np.int64) * COLOR_BINS // 256
        idx = (c[:, 0] * COLOR_BINS + c[:, 1]) * COLOR_BINS + c[:, 2]
        hist = np.bincount(idx, minlength=COLOR_BINS**3).astype(np.float64)
        kind = "color"
    else:
        per_z = volume.occupancy.sum(axis=(0, 1))
        n_bands = -(-len(per_z) // HEIGHT_BAND)
        per_z = np.pad(per_z, (0, n_bands * HEIGHT_BAND - len(per_z)))
        hist = per_z.reshape(n_bands, HEIGHT_BAND).sum(axis=1).astype(np.float64)
        kind = "height"
    total = hist.sum()
    return Descriptor(kind, hist / total if total > 0 else hist)


def descriptor_distance(a: Descriptor, b: Descriptor) -> float:
    if a.kind != b.kind:
        raise DescriptorKindError(f"cannot compare a {a.kind} descriptor with a {b.kind} descriptor")
    return float(np.linalg.norm(a.vector - b.vector))


# ─── Motion ───────────────────────────────────────────────────────────────────
def lk_flow(
    f_prev: np.ndarray,
    f_cur: np.ndarray,
    point: tuple[float, float],
    window: int = 21,
    iters: int = 10,
) -> FlowResult:
    """Single-scale iterative Lucas-Kanade displacement of the window centered on `point`."""
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    f_prev = np.asarray(f_prev, dtype=np.float64)
    f_cur = np.asarray(f_cur, dtype=np.float64)
    half = window // 2
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    gx_off, gy_off = np.meshgrid(offsets, offsets, indexing="ij")
    xs = float(point[0]) + gx_off.ravel()
    ys = float(point[1]) + gy_off.ravel()

    def sample(image: np.ndarray, dx: float = 0.0, dy: float = 0.0) -> np.ndarray:
        return ndimage.map_coordinates(image, [xs + dx, ys + dy], order=1, mode="nearest")

    grad_x, grad_y = np.gradient(f_prev)
    gx, gy = sample(grad_x), sample(grad_y)
    tensor = np.array([[gx @ gx, gx @ gy], [gx @ gy, gy @ gy]])
    if not np.any(tensor) or np.linalg.cond(tensor) > CONDITION_LIMIT:
        return FlowResult(0.0, 0.0, degenerate=True)
    inverse = np.linalg.inv(tensor)
    template = sample(f_prev)

    dx = dy = 0.0
    for _ in range(iters):
        err = template - sample(f_cur, dx, dy)
        step = inverse @ np.array([gx @ err, gy @ err])
        dx += float(step[0])
        dy += float(step[1])
        if np.hypot(*step) < 1e-3:
            break
    return FlowResult(dx, dy)


# ─── Tracker ──────────────────────────────────────────────────────────────────
Rescore = Callable[[tuple[int, int]], float]


def step(
    state: TrackerState,
    features: FeatureMaps,
    proposals: Sequence[Proposal],
    descriptors: Sequence[Descriptor],
    rescore: Rescore,
    threads: int = 1,
) -> tuple[TrackerState, list[TrackedPerson]]:
    """Advance every trajectory by one frame. Mutates and returns `state`."""
    cfg = state.config
    if len(descriptors) != len(proposals):
        raise ValueError("one descriptor per proposal is required")
    state.frame += 1
    current = ndimage.gaussian_filter(features.f_t_normalized.astype(np.float64), cfg.lk_sigma)
    previous = state.previous_map
    live = state.trajectories

    def predict(track: Trajectory) -> tuple[tuple[float, float], FlowResult | None]:
        x, y = track.position
        if previous is None or previous.shape != current.shape:
            flow = None
        else:
            flow = lk_flow(previous, current, (x, y), cfg.lk_window, cfg.lk_iters)
        if flow is None or flow.degenerate:
            return (x + track.velocity[0], y + track.velocity[1]), flow
        return (x + flow.dx, y + flow.dy), flow

    if threads > 1 and len(live) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            predictions = list(pool.map(predict, live))
    else:
        predictions = [predict(t) for t in live]

    problem = build_problem(
        np.array([p for p, _ in predictions]).reshape(-1, 2),
        [t.appearance for t in live],
        np.array([p.xy for p in proposals], dtype=np.float64).reshape(-1, 2),
        list(descriptors),
        np.array([p.person_prob if p.person_prob is not None else 0.0 for p in proposals]),
        cfg.gate_radius,
        cfg.max_edges,
        cfg.weights,
        distance=descriptor_distance,
    )
    matching = solve(problem)
    if cfg.matching_dump is not None:
        dump_problem(cfg.matching_dump, problem, matching)
    matched_rows = {i: j for i, j in matching.pairs}
    matched_cols = set(matched_rows.values())

    for i, track in enumerate(live):
        pred, flow = predictions[i]
        track.age += 1
        if i in matched_rows:
            j = matched_rows[i]
            cand = proposals[j]
            last = track.position
            delta = (cand.xy[0] - last[0], cand.xy[1] - last[1])
            if flow is not None and not flow.degenerate:
                track.velocity = (0.5 * delta[0] + 0.5 * flow.dx, 0.5 * delta[1] + 0.5 * flow.dy)
            else:
                track.velocity = delta
            track.history.append(HistoryEntry(float(cand.xy[0]), float(cand.xy[1]), False))
            track.hits += 1
            rate = 1.0 / min(track.hits, cfg.appearance_cap)
            track.appearance = Descriptor(
                track.appearance.kind, (1.0 - rate) * track.appearance.vector + rate * descriptors[j].vector
            )
            track.observe(cand.person_prob if cand.person_prob is not None else 0.0)
        else:
            track.history.append(HistoryEntry(float(pred[0]), float(pred[1]), True))
            track.observe(rescore((int(round(pred[0])), int(round(pred[1])))))

    for j, cand in enumerate(proposals):
        if j in matched_cols:
            continue
        track = Trajectory(id=state.next_id, appearance=descriptors[j], age=1, hits=1)
        state.next_id += 1
        track.history.append(HistoryEntry(float(cand.xy[0]), float(cand.xy[1]), False))
        track.observe(cand.person_prob if cand.person_prob is not None else 0.0)
        live.append(track)
        logger.debug("frame %d: trajectory %d born at %s", state.frame, track.id, cand.xy)

    survivors = []
    for track in live:
        if track.person_score < cfg.tau_kill:
            logger.debug("frame %d: trajectory %d removed (score %.3f)", state.frame, track.id, track.person_score)
            continue
        survivors.append(track)
    state.trajectories = survivors
    state.previous_map = current

    reported = [
        TrackedPerson(state.frame, t.id, t.history[-1].x, t.history[-1].y, t.history[-1].predicted, t.person_score, t.appearance)
        for t in survivors
        if t.age >= cfg.probation
    ]
    return state, reported


class Tracker:
    """Stateful wrapper over `step` for frame-by-frame use."""

    def __init__(self, config: TrackerConfig | None = None, threads: int = 1):
        self.state = TrackerState(config=config or TrackerConfig())
        self.threads = threads

    def step(
        self,
        features: FeatureMaps,
        proposals: Sequence[Proposal],
        descriptors: Sequence[Descriptor],
        rescore: Rescore,
    ) -> list[TrackedPerson]:
        _, reported = step(self.state, features, proposals, descriptors, rescore, self.threads)
        return reported

    @property
    def trajectories(self) -> list[Trajectory]:
        return self.state.trajectories


def write_track_log(path: Path, reported: Sequence[TrackedPerson]) -> None:
    """Append one JSON line per reported trajectory."""
    with Path(path).open("a") as fh:
        for t in reported:
            record = TrackLogRecord(frame=t.frame, id=t.id, x=t.x, y=t.y, predicted=t.predicted, person_score=t.person_score)
            fh.write(record.model_dump_json() + "\n")
