import json

import numpy as np
import pytest
from scipy import ndimage

from volumetrack.exceptions import DescriptorKindError
from volumetrack.models.detection import Proposal
from volumetrack.models.features import FeatureMaps
from volumetrack.models.tracking import Descriptor, TrackerConfig, TrackerState
from volumetrack.models.volume import GridSpec, OccupancyVolume
from volumetrack.schemas.matching import AssignmentDump
from volumetrack.services.matching import from_dump
from volumetrack.services.tracking import (
    Tracker,
    appearance_descriptor,
    descriptor_distance,
    lk_flow,
    step,
    write_track_log,
)

HEIGHT = Descriptor("height", np.full(20, 0.05))


def _bump(shape, center, sigma=4.0):
    x, y = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")
    return np.exp(-((x - center[0]) ** 2 + (y - center[1]) ** 2) / (2 * sigma**2))


def _maps(centers, shape=(100, 100)) -> FeatureMaps:
    image = np.zeros(shape)
    for c in centers:
        image = np.maximum(image, 0.9 * _bump(shape, c))
    stacked = np.repeat(image[..., None], 3, axis=-1).astype(np.float32)
    heights = np.rint(image * 100).astype(np.int32)
    return FeatureMaps(heights, heights, heights, 100, stacked)


def _proposal(xy, prob=1.0):
    return Proposal(xy, 1.0, prob, prob >= 0.5)


def _always(prob):
    return lambda xy: prob


def test_descriptor_of_empty_volume_is_zero():
    volume = OccupancyVolume.empty(GridSpec(dims=(80, 80, 100)))
    desc = appearance_descriptor(volume)
    assert desc.kind == "height"
    assert desc.vector.shape == (20,)
    assert not desc.vector.any()


def test_identical_volumes_have_zero_distance(rng):
    occ = rng.random((80, 80, 100)) < 0.01
    a = appearance_descriptor(OccupancyVolume(GridSpec(dims=(80, 80, 100)), occ))
    b = appearance_descriptor(OccupancyVolume(GridSpec(dims=(80, 80, 100)), occ.copy()))
    assert descriptor_distance(a, b) == 0.0


def test_height_profile_shift(rng):
    spec = GridSpec(dims=(80, 80, 100))
    occ = np.zeros((80, 80, 100), dtype=bool)
    occ[30:50, 30:50, 10:40] = rng.random((20, 20, 30)) < 0.3
    shifted = np.roll(occ, 10, axis=2)
    a = appearance_descriptor(OccupancyVolume(spec, occ))
    b = appearance_descriptor(OccupancyVolume(spec, shifted))
    np.testing.assert_allclose(b.vector[2:], a.vector[:-2])
    assert descriptor_distance(a, b) == pytest.approx(float(np.linalg.norm(a.vector - b.vector)))


def test_color_descriptor_histogram():
    desc = appearance_descriptor(OccupancyVolume.empty(GridSpec()), np.tile([255, 0, 0], (10, 1)))
    assert desc.kind == "color"
    assert desc.vector.shape == (512,)
    assert desc.vector[7 * 64] == 1.0


def test_descriptor_kinds_must_match():
    with pytest.raises(DescriptorKindError):
        descriptor_distance(HEIGHT, Descriptor("color", np.zeros(512)))


def test_lk_flow_static_image():
    image = _bump((60, 60), (30, 30))
    flow = lk_flow(image, image, (30, 30))
    assert (flow.dx, flow.dy) == pytest.approx((0.0, 0.0), abs=1e-9)
    assert not flow.degenerate


def test_lk_flow_recovers_translation():
    flow = lk_flow(_bump((60, 60), (30, 30)), _bump((60, 60), (32, 30)), (30, 30))
    assert flow.dx == pytest.approx(2.0, abs=0.5)
    assert flow.dy == pytest.approx(0.0, abs=0.5)


def test_lk_flow_flat_window_is_degenerate():
    flat = np.ones((60, 60))
    flow = lk_flow(flat, flat, (30, 30))
    assert flow.degenerate
    assert (flow.dx, flow.dy) == (0.0, 0.0)


def test_lk_flow_rejects_even_window():
    with pytest.raises(ValueError):
        lk_flow(np.zeros((9, 9)), np.zeros((9, 9)), (4, 4), window=4)


def test_stationary_person_single_trajectory():
    tracker = Tracker()
    maps = _maps([(50, 50)])
    for _ in range(10):
        tracker.step(maps, [_proposal((50, 50))], [HEIGHT], _always(1.0))
    assert len(tracker.trajectories) == 1
    track = tracker.trajectories[0]
    assert len(track.history) == 10
    assert not any(entry.predicted for entry in track.history)
    assert track.person_score == pytest.approx(1.0)


def test_probation_delays_reporting():
    tracker = Tracker(TrackerConfig(probation=3))
    counts = [len(tracker.step(_maps([(50, 50)]), [_proposal((50, 50))], [HEIGHT], _always(1.0))) for _ in range(4)]
    assert counts == [0, 0, 1, 1]


def test_occlusion_keeps_identity():
    tracker = Tracker()
    maps = _maps([(50, 50)])
    ids = []
    for frame in range(10):
        proposals = [] if 4 <= frame <= 6 else [_proposal((50, 50))]
        reported = tracker.step(maps, proposals, [HEIGHT] * len(proposals), _always(1.0))
        ids.extend(t.id for t in reported)
    assert set(ids) == {1}
    history = tracker.trajectories[0].history
    assert [e.predicted for e in history].count(True) == 3
    assert [e.predicted for e in history][4:7] == [True, True, True]


def test_false_alarm_is_never_reported():
    tracker = Tracker()
    maps = _maps([(70, 70), (20, 20)])
    reported_ids = set()
    for _ in range(12):
        proposals = [_proposal((70, 70), 1.0), _proposal((20, 20), 0.1)]
        reported = tracker.step(maps, proposals, [HEIGHT, HEIGHT], lambda xy: 1.0 if xy == (70, 70) else 0.1)
        reported_ids.update(t.id for t in reported)
        assert all(t.xy == (70, 70) for t in reported)
    assert reported_ids == {1}
    assert [t.id for t in tracker.trajectories] == [1]


def test_unverified_coasting_track_dies():
    state = TrackerState(TrackerConfig(tau_kill=0.3))
    maps = _maps([(50, 50)])
    step(state, maps, [_proposal((50, 50), 0.5)], [HEIGHT], _always(0.0))
    assert len(state.trajectories) == 1
    step(state, maps, [], [], _always(0.0))
    assert state.trajectories == []


def test_moving_person_followed():
    tracker = Tracker()
    ids = set()
    for frame in range(8):
        xy = (30 + 3 * frame, 40)
        reported = tracker.step(_maps([xy]), [_proposal(xy)], [HEIGHT], _always(1.0))
        ids.update(t.id for t in reported)
    assert ids == {1}
    assert tracker.trajectories[0].position == (51.0, 40.0)


def test_mismatched_descriptor_kind_raises():
    tracker = Tracker()
    maps = _maps([(50, 50)])
    tracker.step(maps, [_proposal((50, 50))], [HEIGHT], _always(1.0))
    with pytest.raises(DescriptorKindError):
        tracker.step(maps, [_proposal((50, 50))], [Descriptor("color", np.zeros(512))], _always(1.0))


def test_threaded_prediction_matches_sequential():
    def run(threads):
        tracker = Tracker(threads=threads)
        out = []
        for frame in range(6):
            people = [(20 + frame, 20), (70, 70 - frame), (20, 80)]
            reported = tracker.step(_maps(people), [_proposal(p) for p in people], [HEIGHT] * 3, _always(1.0))
            out.append([(t.id, t.x, t.y) for t in reported])
        return out

    assert run(4) == run(1)


def test_write_track_log(tmp_path):
    tracker = Tracker(TrackerConfig(probation=1))
    reported = tracker.step(_maps([(50, 50)]), [_proposal((50, 50))], [HEIGHT], _always(1.0))
    write_track_log(tmp_path / "tracks.jsonl", reported)
    write_track_log(tmp_path / "tracks.jsonl", reported)
    lines = (tmp_path / "tracks.jsonl").read_text().splitlines()
    assert len(lines) == 2
    record = json.loads(lines[0])
    assert (record["frame"], record["id"], record["x"], record["y"]) == (0, 1, 50.0, 50.0)


def test_matching_dump_written_per_step(tmp_path):
    path = tmp_path / "dumps" / "assign.jsonl"
    tracker = Tracker(TrackerConfig(matching_dump=path))
    maps = _maps([(50, 50)])
    for _ in range(3):
        tracker.step(maps, [_proposal((50, 50))], [HEIGHT], _always(1.0))
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    first, _ = from_dump(AssignmentDump.model_validate_json(lines[0]))
    assert (first.m, first.n) == (0, 1)
    problem, matching = from_dump(AssignmentDump.model_validate_json(lines[-1]))
    assert (problem.m, problem.n) == (1, 1)
    assert matching.pairs == [(0, 0)]


def test_ids_never_reused():
    state = TrackerState(TrackerConfig(tau_kill=0.3))
    maps = _maps([(50, 50)])
    seen: list[set[int]] = []
    for frame in range(10):
        proposals = [_proposal((50, 50), 0.5)] if frame % 2 == 0 else []
        step(state, maps, proposals, [HEIGHT] * len(proposals), _always(0.0))
        seen.append({t.id for t in state.trajectories})
    assert seen == [{1}, set(), {2}, set(), {3}, set(), {4}, set(), {5}, set()]
    assert state.next_id == 6


def test_person_score_is_mean_of_observed_probabilities():
    tracker = Tracker()
    maps = _maps([(50, 50)])
    observed = []
    for prob in (0.9, 0.7, 0.8):
        tracker.step(maps, [_proposal((50, 50), prob)], [HEIGHT], _always(0.6))
        observed.append(prob)
    for _ in range(2):
        tracker.step(maps, [], [], _always(0.6))
        observed.append(0.6)
    track = tracker.trajectories[0]
    assert track.prob_count == len(observed)
    assert track.person_score == pytest.approx(sum(observed) / len(observed))


def test_lk_flow_on_smooth_texture():
    rng = np.random.default_rng(99)
    hits = 0
    for _ in range(200):
        texture = ndimage.gaussian_filter(rng.random((100, 100)), 5.0)
        texture /= texture.max()
        dx, dy = rng.uniform(-3, 3, size=2)
        moved = ndimage.shift(texture, (dx, dy), order=3, mode="nearest")
        flow = lk_flow(texture, moved, (50, 50))
        hits += not flow.degenerate and np.hypot(flow.dx - dx, flow.dy - dy) <= 0.5
    assert hits >= 190
