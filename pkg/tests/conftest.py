import numpy as np
import pytest

from volumetrack.models.volume import GridSpec, OccupancyVolume


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def person_grid() -> GridSpec:
    return GridSpec(origin=(0.0, 0.0, 0.0), voxel_size=0.02, dims=(80, 80, 100), ground_z=1)


def random_volume(rng: np.random.Generator, dims=(80, 80, 100), density=0.05, ground_z=1) -> OccupancyVolume:
    spec = GridSpec(dims=dims, ground_z=ground_z)
    return OccupancyVolume(spec, rng.random(dims) < density)


def small_scene(frames: int = 4, seed: int = 7, people: int = 1, poses=("tpose",), **extra) -> dict:
    """A scene script small enough for unit tests."""
    anchors = [[1.0, 1.0], [2.6, 2.6], [1.0, 2.6]]
    script = {
        "frames": frames,
        "seed": seed,
        "room": [3.6, 3.6],
        "density": 1500,
        "people": [
            {"id": i + 1, "anchor": anchors[i], "walk_radius": 0.1, "poses": list(poses), "height_scale": 0.85}
            for i in range(people)
        ],
    }
    script.update(extra)
    return script
