"""
Hand localization inside a person volume.
- top-down: segment the 80x80 patch into left / right / none, per-axis lower median gives (x, y)
- side: crop the 41x41 thin volume at each hand, segment its four side views, pooled lower median gives z
- a hand missing at either stage falls back to the volume center (40, 40, 50)
"""

import logging
from abc import ABC, abstractmethod
from typing import Any, Mapping, Optional

import numpy as np
from scipy import ndimage

from volumetrack.exceptions import GroundTruthError
from volumetrack.models.features import SIDE_DIRECTIONS
from volumetrack.models.hands import (
    HAND,
    HAND_LABELS,
    HANDS,
    LEFT,
    NONE,
    RIGHT,
    TOP_VIEW,
    HandEstimate,
    HandPoint,
    LabelMode,
    ViewKey,
)
from volumetrack.models.volume import PERSON_DIMS, THIN_DIMS, OccupancyVolume
from volumetrack.services.projection import side_views
from volumetrack.services.volume import crop_thin_volume, thin_offset
from volumetrack.utils.seeding import keyed_rng

logger = logging.getLogger(__name__)


# ─── Segmenters ───────────────────────────────────────────────────────────────
class Segmenter2D(ABC):
    @abstractmethod
    def label(self, image: np.ndarray, mode: LabelMode, view: ViewKey = TOP_VIEW) -> np.ndarray:
        """Integer label map with the spatial dims of `image`: topdown {0, 1 left, 2 right}, side {0, 1 hand}."""
        pass


class NullSegmenter(Segmenter2D):
    def label(self, image: np.ndarray, mode: LabelMode, view: ViewKey = TOP_VIEW) -> np.ndarray:
        return np.zeros(image.shape[:2], dtype=np.uint8)


def _boundary_band(mask: np.ndarray, width: int = 2) -> np.ndarray:
    if not mask.any():
        return np.zeros_like(mask)
    return ndimage.binary_dilation(mask, iterations=width) & ~ndimage.binary_erosion(mask, iterations=width)


class OracleSegmenter(Segmenter2D):
    """
    Labels the pixels onto which the centered person's ground-truth hand voxels project.

    flip_rate: probability of toggling each pixel in a 2-px band around a label boundary
    wipe_prob: probability that a side view comes back empty
    """

    def __init__(self, flip_rate: float = 0.0, wipe_prob: float = 0.0, seed: int = 0):
        if not (0.0 <= flip_rate <= 1.0 and 0.0 <= wipe_prob <= 1.0):
            raise ValueError("flip_rate and wipe_prob must lie in [0, 1]")
        self.flip_rate = flip_rate
        self.wipe_prob = wipe_prob
        self.seed = seed
        self._hands: Optional[dict[str, np.ndarray]] = None
        self._frame = 0
        self._person = 0

    def set_ground_truth(self, hand_voxels: Mapping[str, np.ndarray], frame: int = 0, person: int = 0) -> None:
        """hand_voxels: per hand, (K, 3) voxel indices in person-volume coordinates."""
        self._hands = {h: np.asarray(hand_voxels.get(h, np.zeros((0, 3))), dtype=np.int64).reshape(-1, 3) for h in HANDS}
        self._frame = frame
        self._person = person

    def _rng(self, view: ViewKey) -> np.random.Generator:
        if view.direction == "top":
            code = 0
        else:
            code = 1 + HANDS.index(view.hand) * len(SIDE_DIRECTIONS) + SIDE_DIRECTIONS.index(view.direction)
        return keyed_rng(self.seed, self._frame, self._person, code)

    def _corrupt(self, mask: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.flip_rate <= 0:
            return mask
        flips = _boundary_band(mask) & (rng.random(mask.shape) < self.flip_rate)
        return mask ^ flips

    def label(self, image: np.ndarray, mode: LabelMode, view: ViewKey = TOP_VIEW) -> np.ndarray:
        if self._hands is None:
            raise GroundTruthError("oracle segmenter used without ground truth for this person")
        shape = image.shape[:2]
        rng = self._rng(view)
        if mode == "topdown":
            masks = {}
            for hand in HANDS:
                mask = np.zeros(shape, dtype=bool)
                v = self._hands[hand]
                inside = (v[:, 0] >= 0) & (v[:, 0] < shape[0]) & (v[:, 1] >= 0) & (v[:, 1] < shape[1])
                mask[v[inside, 0], v[inside, 1]] = True
                masks[hand] = self._corrupt(mask, rng)
            labels = np.zeros(shape, dtype=np.uint8)
            labels[masks["right"]] = RIGHT
            labels[masks["left"]] = LEFT
            return labels

        if view.hand not in HANDS:
            raise ValueError(f"side view needs a hand, got {view.hand!r}")
        if self.wipe_prob > 0 and rng.random() < self.wipe_prob:
            return np.zeros(shape, dtype=np.uint8)
        local = self._hands[view.hand] - np.asarray(thin_offset(view.center_xy))
        inside = np.all((local >= 0) & (local < np.asarray((THIN_DIMS[0], THIN_DIMS[1], shape[1]))), axis=1)
        local = local[inside]
        transverse = local[:, 1] if view.direction in ("+x", "-x") else local[:, 0]
        mask = np.zeros(shape, dtype=bool)
        mask[transverse, local[:, 2]] = True
        return self._corrupt(mask, rng).astype(np.uint8)


class HeuristicSegmenter(Segmenter2D):
    """
    Learning-free extremity picker, best effort only.

    topdown: the two occupied pixels (within `radius` of the patch center) farthest from
    the occupancy centroid, at least `separation` apart; left/right by the sign of the
    cross product against the centroid-to-midpoint axis.
    side: the uppermost occupied z-run near the view's vertical center line.
    """

    def __init__(self, radius: int = 35, separation: int = 10, disk: int = 3, band: int = 3):
        self.radius = radius
        self.separation = separation
        self.disk = disk
        self.band = band

    def _disk(self, occupied: np.ndarray, center: np.ndarray) -> np.ndarray:
        gx, gy = np.indices(occupied.shape)
        return occupied & ((gx - center[0]) ** 2 + (gy - center[1]) ** 2 <= self.disk**2)

    def label(self, image: np.ndarray, mode: LabelMode, view: ViewKey = TOP_VIEW) -> np.ndarray:
        image = np.asarray(image)
        labels = np.zeros(image.shape[:2], dtype=np.uint8)
        if mode == "topdown":
            occupied = image[..., 0] > 0 if image.ndim == 3 else image > 0
            center = np.array([s // 2 for s in occupied.shape], dtype=np.float64)
            pix = np.argwhere(occupied).astype(np.float64)
            pix = pix[np.linalg.norm(pix - center, axis=1) <= self.radius]
            if len(pix) == 0:
                return labels
            centroid = pix.mean(axis=0)
            reach = np.linalg.norm(pix - centroid, axis=1)
            first = pix[int(np.argmax(reach))]
            far_enough = np.linalg.norm(pix - first, axis=1) >= self.separation
            picks = [first]
            if far_enough.any():
                picks.append(pix[far_enough][int(np.argmax(reach[far_enough]))])
            mid = np.mean(picks, axis=0)
            axis = mid - centroid
            sides = [float(axis[0] * (p - centroid)[1] - axis[1] * (p - centroid)[0]) for p in picks]
            if len(picks) == 2:
                # the more clearly negative side is left
                left_first = sides[0] < sides[1] or (sides[0] == sides[1] and sides[0] < 0)
                order = [LEFT, RIGHT] if left_first else [RIGHT, LEFT]
            else:
                order = [LEFT if sides[0] < 0 else RIGHT]
            for p, cls in zip(picks, order):
                labels[self._disk(occupied & (labels == NONE), p)] = cls
            return labels

        occupied = image[..., 1] > 0 if image.ndim == 3 else image > 0
        mid_row = occupied.shape[0] // 2
        rows = slice(max(mid_row - self.band, 0), mid_row + self.band + 1)
        column = occupied[rows].any(axis=0)
        zs = np.nonzero(column)[0]
        if len(zs) == 0:
            return labels
        top = int(zs[-1])
        bottom = top
        while bottom - 1 >= 0 and column[bottom - 1]:
            bottom -= 1
        z_center = (top + bottom) // 2
        band_rows = np.arange(occupied.shape[0])[rows]
        hits = band_rows[occupied[rows, z_center]]
        if len(hits) == 0:
            hits = band_rows[occupied[rows, top]]
        row = int(hits[np.argmin(np.abs(hits - mid_row))])
        labels[self._disk(occupied, np.array([row, z_center]))] = HAND
        return labels


_SEGMENTERS: dict[str, type[Segmenter2D]] = {
    "oracle": OracleSegmenter,
    "heuristic": HeuristicSegmenter,
    "none": NullSegmenter,
}


def get_segmenter(kind: str, **kwargs: Any) -> Segmenter2D:
    segmenter_class = _SEGMENTERS.get(kind)
    if not segmenter_class:
        raise ValueError(f"Unknown segmenter: '{kind}'. Supported: {list(_SEGMENTERS.keys())}")
    return segmenter_class(**kwargs)


# ─── Medians ──────────────────────────────────────────────────────────────────
def lower_median(values: np.ndarray) -> int:
    ordered = np.sort(np.asarray(values).ravel())
    return int(ordered[(len(ordered) - 1) // 2])


def median_xy(labels: np.ndarray, cls: int | str) -> Optional[tuple[int, int]]:
    cls = HAND_LABELS[cls] if isinstance(cls, str) else cls
    pix = np.argwhere(labels == cls)
    if len(pix) == 0:
        return None
    return (lower_median(pix[:, 0]), lower_median(pix[:, 1]))


def median_z(side_labels: Mapping[str, np.ndarray] | list[np.ndarray]) -> Optional[int]:
    maps = side_labels.values() if isinstance(side_labels, Mapping) else side_labels
    zs = [np.nonzero(m == HAND)[1] for m in maps]
    pooled = np.concatenate(zs) if zs else np.zeros(0, dtype=np.int64)
    if len(pooled) == 0:
        return None
    return lower_median(pooled)


# ─── Localization ─────────────────────────────────────────────────────────────
def localize_hands(person: OccupancyVolume, f_t_patch: np.ndarray, seg: Segmenter2D) -> HandEstimate:
    if person.dims[:2] != PERSON_DIMS[:2]:
        raise ValueError(f"person volume must be 80x80xN_z, got {person.dims}")
    top = seg.label(f_t_patch, "topdown", TOP_VIEW)
    points = {}
    for hand in HANDS:
        cls = HAND_LABELS[hand]
        xy_count = int((top == cls).sum())
        xy = median_xy(top, cls)
        if xy is None:
            logger.debug("%s hand not found top-down, using volume center", hand)
            points[hand] = HandPoint.fallback()
            continue
        views = side_views(crop_thin_volume(person, xy))
        side = {d: seg.label(views[d], "side", ViewKey(hand, d, xy)) for d in SIDE_DIRECTIONS}
        z_count = int(sum((m == HAND).sum() for m in side.values()))
        z = median_z(side)
        if z is None:
            logger.debug("%s hand has no side-view support, using volume center", hand)
            points[hand] = HandPoint.fallback(xy_count, 0)
            continue
        points[hand] = HandPoint((xy[0], xy[1], z), False, xy_count, z_count)
    return HandEstimate(points["left"], points["right"])
