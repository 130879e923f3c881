import numpy as np
import pytest

from tests.conftest import random_volume
from volumetrack.exceptions import ShapeMismatchError
from volumetrack.models.volume import GridSpec, OccupancyVolume, PointFrame
from volumetrack.services.projection import (
    bottom_up,
    column_sum,
    compute_feature_maps,
    extract_patch,
    feature_maps_from_voxels,
    side_views,
    stack_features,
    top_down,
)
from volumetrack.services.volume import quantize_frame, voxelize
from volumetrack.utils.pgm import read_pgm16, write_pgm16


def _naive_maps(occ: np.ndarray, ground_z: int):
    n_x, n_y, n_z = occ.shape
    f_t = np.zeros((n_x, n_y), dtype=int)
    f_s = np.zeros((n_x, n_y), dtype=int)
    f_b = np.zeros((n_x, n_y), dtype=int)
    for x in range(n_x):
        for y in range(n_y):
            for z in range(n_z):
                if occ[x, y, z]:
                    f_t[x, y] = max(f_t[x, y], z + 1)
                    f_s[x, y] += 1
                    if z > ground_z:
                        f_b[x, y] = max(f_b[x, y], n_z - z)
    return f_t, f_s, f_b


def test_top_down_single_voxel():
    volume = OccupancyVolume.empty(GridSpec(dims=(8, 8, 20)))
    volume.occupancy[3, 4, 9] = True
    f_t = top_down(volume)
    assert f_t[3, 4] == 10
    assert f_t.sum() == 10


def test_top_down_takes_highest_voxel():
    volume = OccupancyVolume.empty(GridSpec(dims=(4, 4, 20)))
    volume.occupancy[1, 1, [2, 7]] = True
    assert top_down(volume)[1, 1] == 8


def test_column_sum_full_column():
    volume = OccupancyVolume.empty(GridSpec(dims=(2, 2, 100)))
    volume.occupancy[0, 0, :] = True
    f_s = column_sum(volume)
    assert f_s[0, 0] == 100
    assert f_s[1, 1] == 0


def test_bottom_up_ignores_ground():
    volume = OccupancyVolume.empty(GridSpec(dims=(2, 2, 100), ground_z=1))
    volume.occupancy[0, 0, 1] = True
    volume.occupancy[1, 1, [5, 90]] = True
    f_b = bottom_up(volume, 1)
    assert f_b[0, 0] == 0
    assert f_b[1, 1] == 95


def test_maps_match_naive_loops(rng):
    volume = random_volume(rng, dims=(12, 10, 30), density=0.08, ground_z=2)
    f_t, f_s, f_b = _naive_maps(volume.occupancy, 2)
    np.testing.assert_array_equal(top_down(volume), f_t)
    np.testing.assert_array_equal(column_sum(volume), f_s)
    np.testing.assert_array_equal(bottom_up(volume, 2), f_b)
    assert (f_s <= f_t).all()


def test_maps_of_disjoint_columns_combine(rng):
    a = random_volume(rng, dims=(10, 10, 20), density=0.2)
    b = random_volume(rng, dims=(10, 10, 20), density=0.2)
    a.occupancy[5:] = False
    b.occupancy[:5] = False
    union = OccupancyVolume(a.spec, a.occupancy | b.occupancy)
    np.testing.assert_array_equal(top_down(union), np.maximum(top_down(a), top_down(b)))
    np.testing.assert_array_equal(column_sum(union), column_sum(a) + column_sum(b))
    np.testing.assert_array_equal(bottom_up(union, 1), np.maximum(bottom_up(a, 1), bottom_up(b, 1)))


def test_stack_features_normalizes():
    f_t = np.full((3, 3), 100)
    f_s = np.full((3, 3), 100)
    f_b = np.zeros((3, 3))
    stacked = stack_features(f_t, f_s, f_b, 100)
    assert stacked.shape == (3, 3, 3)
    assert stacked[..., 0].max() == pytest.approx(1.0)
    assert stacked[..., 1].max() == pytest.approx(1.0)
    assert stacked[..., 2].max() == 0.0


def test_stack_features_zero_maps():
    z = np.zeros((4, 4))
    assert not stack_features(z, z, z, 100).any()


def test_stack_features_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        stack_features(np.zeros((3, 3)), np.zeros((3, 4)), np.zeros((3, 3)), 100)


def test_sparse_feature_maps_match_dense(rng):
    grid = GridSpec(dims=(60, 50, 100), ground_z=1)
    frame = PointFrame(0, rng.uniform(0.0, 1.0, size=(5000, 3)) * np.array([1.2, 1.0, 2.0]))
    dense = compute_feature_maps(voxelize(frame, grid))
    sparse = feature_maps_from_voxels(quantize_frame(frame, grid))
    np.testing.assert_array_equal(sparse.f_t, dense.f_t)
    np.testing.assert_array_equal(sparse.f_s, dense.f_s)
    np.testing.assert_array_equal(sparse.f_b, dense.f_b)
    np.testing.assert_array_equal(sparse.stacked, dense.stacked)


def test_extract_patch_interior_copy(rng):
    image = rng.random((100, 90))
    patch = extract_patch(image, (50, 45), 80)
    np.testing.assert_array_equal(patch, image[10:90, 5:85])


def test_extract_patch_zero_pads_corner(rng):
    image = rng.random((100, 100)) + 1.0
    patch = extract_patch(image, (0, 0), 80)
    assert not patch[:40, :].any()
    assert not patch[:, :40].any()
    np.testing.assert_array_equal(patch[40:, 40:], image[:40, :40])


def test_extract_patch_offset_oracle(rng):
    image = rng.random((30, 30, 3))
    cx, cy, size = 27, 2, 51
    patch = extract_patch(image, (cx, cy), size)
    for i in range(size):
        for j in range(size):
            x, y = cx - size // 2 + i, cy - size // 2 + j
            expected = image[x, y] if 0 <= x < 30 and 0 <= y < 30 else np.zeros(3)
            np.testing.assert_array_equal(patch[i, j], expected)


def test_extract_patch_rejects_bad_size():
    with pytest.raises(ValueError):
        extract_patch(np.zeros((4, 4)), (0, 0), 0)


def test_side_view_near_face():
    thin = OccupancyVolume.empty(GridSpec(dims=(41, 41, 100)))
    thin.occupancy[40, 20, 50] = True
    views = side_views(thin)
    assert views["+x"][20, 50, 0] == pytest.approx(1.0)
    assert views["-x"][20, 50, 0] == pytest.approx(1.0 / 41)
    assert views["+x"][20, 50, 1] == pytest.approx(1.0 / 41)


def test_side_views_empty():
    views = side_views(OccupancyVolume.empty(GridSpec(dims=(41, 41, 100))))
    for direction in views:
        assert views[direction].shape == (41, 100, 3)
        assert not views[direction].any()


def test_side_views_mirror_symmetry(rng):
    thin = random_volume(rng, dims=(41, 41, 100), density=0.02)
    mirror_x = OccupancyVolume(thin.spec, thin.occupancy[::-1])
    mirror_y = OccupancyVolume(thin.spec, thin.occupancy[:, ::-1])
    np.testing.assert_array_equal(side_views(thin)["+x"], side_views(mirror_x)["-x"])
    np.testing.assert_array_equal(side_views(thin)["+y"], side_views(mirror_y)["-y"])


def test_side_views_reject_wrong_dims():
    with pytest.raises(ShapeMismatchError):
        side_views(OccupancyVolume.empty(GridSpec(dims=(40, 41, 100))))


def test_pgm_round_trip_keeps_scale(tmp_path, rng):
    image = rng.integers(0, 101, size=(12, 7))
    write_pgm16(tmp_path / "f_t.pgm", image, scale=600.0)
    data, scale = read_pgm16(tmp_path / "f_t.pgm")
    assert scale == 600.0
    np.testing.assert_array_equal(data, np.clip(image * 600, 0, 65535))


def test_quarter_turn_permutes_side_views(rng):
    thin = random_volume(rng, dims=(41, 41, 100), density=0.02)
    turned = OccupancyVolume(thin.spec, np.rot90(thin.occupancy, k=1, axes=(0, 1)).copy())
    before, after = side_views(thin), side_views(turned)
    np.testing.assert_array_equal(after["-x"], before["+y"])
    np.testing.assert_array_equal(after["+x"], before["-y"])
    np.testing.assert_array_equal(after["-y"], before["-x"][::-1])
    np.testing.assert_array_equal(after["+y"], before["+x"][::-1])
