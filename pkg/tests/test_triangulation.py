import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from volumetrack.exceptions import ConfigError, EmptyVolumeError
from volumetrack.models.camera import CameraModel, Keypoint2D
from volumetrack.models.volume import PERSON_DIMS, GridSpec, OccupancyVolume
from volumetrack.services.triangulation import (
    default_rig,
    least_squares_triangulate,
    load_rig,
    project,
    project_points,
    reprojection_costs,
    robust_triangulate,
    save_rig,
    synthesize_keypoints,
)

GRID = GridSpec(origin=(1.2, 1.2, -0.03), voxel_size=0.02, dims=PERSON_DIMS, ground_z=1)
HAND = (55, 40, 60)


def _person(block=10):
    occ = np.zeros(PERSON_DIMS, dtype=bool)
    x, y, z = HAND
    occ[x - block : x + block + 1, y - block : y + block + 1, z - block : z + block + 1] = True
    return OccupancyVolume(GRID, occ)


def _truth_world():
    return GRID.voxel_to_world(np.array(HAND))


def test_point_on_optical_axis():
    cam = CameraModel(500.0, 500.0, 320.0, 240.0, 640, 480)
    assert project(cam, np.array([0.0, 0.0, 1.0])) == pytest.approx((320.0, 240.0))


def test_identity_extrinsics_formula():
    cam = CameraModel(100.0, 100.0, 0.0, 0.0, 640, 480)
    assert project(cam, np.array([0.1, 0.0, 1.0])) == pytest.approx((10.0, 0.0))


def test_point_behind_camera():
    cam = CameraModel(100.0, 100.0, 0.0, 0.0, 640, 480)
    assert project(cam, np.array([0.0, 0.0, -1.0])) is None
    uv, front = project_points(cam, np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 2.0]]))
    assert front.tolist() == [False, True]
    assert np.isnan(uv[0]).all()


def test_projection_matches_homogeneous_matrix(rng):
    for _ in range(20):
        rotation = Rotation.random(random_state=int(rng.integers(1 << 31))).as_matrix()
        cam = CameraModel(*rng.uniform(200, 800, 2), *rng.uniform(0, 400, 2), 800, 600, rotation, rng.normal(size=3))
        points = rng.normal(size=(50, 3)) * 3.0
        uv, front = project_points(cam, points)
        homog = cam.intrinsics @ np.hstack([cam.rotation, cam.translation[:, None]]) @ np.vstack([points.T, np.ones(50)])
        expected = (homog[:2] / homog[2]).T
        np.testing.assert_allclose(uv[front], expected[front], atol=1e-9)


def test_camera_rejects_bad_rotation():
    with pytest.raises(ValueError):
        CameraModel(100.0, 100.0, 0.0, 0.0, 640, 480, np.full((3, 3), 0.5))


def test_default_rig_sees_room_center():
    for cam in default_rig((2.0, 2.0)):
        uv = project(cam, np.array([2.0, 2.0, 1.0]))
        assert uv == pytest.approx((cam.cx, cam.cy), abs=1e-6)


def test_rig_file_round_trip(tmp_path):
    cams = default_rig((2.0, 2.0))
    save_rig(tmp_path / "rig.json", cams)
    loaded = load_rig(tmp_path / "rig.json")
    assert len(loaded) == 4
    np.testing.assert_allclose(loaded[2].rotation, cams[2].rotation)
    np.testing.assert_allclose(loaded[2].translation, cams[2].translation)


def test_bad_rig_file(tmp_path):
    (tmp_path / "rig.json").write_text('[{"fx": 1, "fy": 1, "cx": 0, "cy": 0, "w": 10, "h": 10, "R": [1, 0], "t": [0, 0, 0]}]')
    with pytest.raises(ConfigError):
        load_rig(tmp_path / "rig.json")


def test_noise_free_keypoints_recover_voxel():
    cams = default_rig((2.0, 2.0))
    kps = synthesize_keypoints(cams, _truth_world())
    assert all(kp.present for kp in kps)
    found = robust_triangulate(_person(), GRID, cams, kps, tau=30.0)
    assert sum(abs(a - b) for a, b in zip(found, HAND)) <= 1


def test_single_outlier_saturates():
    cams = default_rig((2.0, 2.0))
    kps = synthesize_keypoints(cams, _truth_world())
    kps[1] = Keypoint2D(1, kps[1].u + 200.0, kps[1].v, True)
    found = robust_triangulate(_person(), GRID, cams, kps, tau=30.0)
    assert sum(abs(a - b) for a, b in zip(found, HAND)) <= 2

    lsq = least_squares_triangulate(cams, kps)
    assert np.linalg.norm(lsq - _truth_world()) / GRID.voxel_size > 5


def test_least_squares_exact_without_noise():
    cams = default_rig((2.0, 2.0))
    kps = synthesize_keypoints(cams, _truth_world())
    np.testing.assert_allclose(least_squares_triangulate(cams, kps), _truth_world(), atol=1e-6)


def test_least_squares_needs_two_rays():
    cams = default_rig((2.0, 2.0))
    kps = [Keypoint2D(0, 320.0, 240.0), Keypoint2D(1, present=False)]
    with pytest.raises(ValueError):
        least_squares_triangulate(cams, kps)


def test_single_view_reprojects_within_tau():
    cams = default_rig((2.0, 2.0))
    kps = synthesize_keypoints(cams, _truth_world())
    single = [kps[0]] + [Keypoint2D(k, present=False) for k in range(1, 4)]
    found = robust_triangulate(_person(), GRID, cams, single, tau=30.0)
    u, v = project(cams[0], GRID.voxel_to_world(np.array(found)))
    assert abs(u - kps[0].u) + abs(v - kps[0].v) < 30.0


def test_absent_views_cost_tau():
    cams = default_rig((2.0, 2.0))
    kps = [Keypoint2D(k, present=False) for k in range(4)]
    np.testing.assert_allclose(reprojection_costs(np.zeros((3, 3)), cams, kps, tau=30.0), 120.0)


def test_dilated_search_reaches_past_surface():
    cams = default_rig((2.0, 2.0))
    occ = np.zeros(PERSON_DIMS, dtype=bool)
    occ[HAND[0] + 2, HAND[1], HAND[2]] = True
    person = OccupancyVolume(GRID, occ)
    kps = synthesize_keypoints(cams, _truth_world())
    assert robust_triangulate(person, GRID, cams, kps, search="occupied") == (HAND[0] + 2, HAND[1], HAND[2])
    assert robust_triangulate(person, GRID, cams, kps, search="dilated", dilation=3) == HAND


def test_empty_volume_raises():
    cams = default_rig((2.0, 2.0))
    kps = synthesize_keypoints(cams, _truth_world())
    with pytest.raises(EmptyVolumeError):
        robust_triangulate(OccupancyVolume.empty(GRID), None, cams, kps)


def test_keypoint_outliers_are_seeded(rng):
    cams = default_rig((2.0, 2.0))
    a = synthesize_keypoints(cams, _truth_world(), np.random.default_rng(5), noise_px=2.0, outlier_rate=0.5)
    b = synthesize_keypoints(cams, _truth_world(), np.random.default_rng(5), noise_px=2.0, outlier_rate=0.5)
    assert a == b
    for kp in a:
        assert 0.0 <= kp.u < 640 and 0.0 <= kp.v < 480


@pytest.mark.parametrize("seed", range(5))
def test_outlier_corrupts_exactly_one_view(seed):
    cams = default_rig((2.0, 2.0))
    clean = synthesize_keypoints(cams, _truth_world())
    noisy = synthesize_keypoints(cams, _truth_world(), np.random.default_rng(seed), outlier_rate=1.0)
    moved = [k for k, (a, b) in enumerate(zip(clean, noisy)) if abs(a.u - b.u) + abs(a.v - b.v) > 1e-9]
    assert len(moved) == 1


def test_outlier_view_can_be_pinned():
    cams = default_rig((2.0, 2.0))
    clean = synthesize_keypoints(cams, _truth_world())
    noisy = synthesize_keypoints(cams, _truth_world(), np.random.default_rng(0), outlier_rate=1.0, outlier_view=2)
    assert [a == b for a, b in zip(clean, noisy)] == [True, True, False, True]
