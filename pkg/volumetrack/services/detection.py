"""
Two-stage people proposer.
- linear stage: W (51x51) correlated over normalized f_t plus b, local maxima above delta, greedy NMS
- verification stage: pluggable verifier scoring the 51x51x3 stacked patch
- training: primal hinge-loss SGD for W, logistic SGD for the verifier
"""

import dataclasses
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any

import numpy as np
from scipy import ndimage, signal, special

from volumetrack.models.detection import DETECTOR_SIZE, LinearDetector, Proposal
from volumetrack.services.projection import extract_patch
from volumetrack.utils import model_io

logger = logging.getLogger(__name__)

RECALL_TARGET = 0.995


# ─── Linear stage ─────────────────────────────────────────────────────────────
def linear_score_map(f_t_normalized: np.ndarray, det: LinearDetector) -> np.ndarray:
    """Score at every pixel with W centered there; the map is zero-padded outside."""
    f = np.asarray(f_t_normalized, dtype=np.float64)
    return signal.correlate(f, det.weights, mode="same", method="fft") + det.bias


def propose(score_map: np.ndarray, det: LinearDetector) -> list[Proposal]:
    peaks = ndimage.maximum_filter(score_map, size=3, mode="constant", cval=-np.inf)
    xs, ys = np.nonzero((score_map >= peaks) & (score_map > det.delta))
    order = sorted(zip(xs.tolist(), ys.tolist()), key=lambda p: (-score_map[p], p[0], p[1]))
    kept: list[Proposal] = []
    for x, y in order:
        if all(max(abs(x - k.xy[0]), abs(y - k.xy[1])) > det.nms_radius for k in kept):
            kept.append(Proposal((x, y), float(score_map[x, y])))
    return kept


def bell_template_detector(sigma: float = 6.0, bias: float = -0.15, delta: float = 0.0, nms_radius: int = 25) -> LinearDetector:
    """Untrained prior: zero-mean Gaussian, so flat floor scores 0 and a head-high blob scores high."""
    half = DETECTOR_SIZE // 2
    r = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2.0 * sigma**2))
    g /= g.sum()
    return LinearDetector(g - g.mean(), bias, delta, nms_radius)


def train_linear(
    patches: np.ndarray,
    labels: np.ndarray,
    epochs: int = 10,
    rate: float = 1e-3,
    regularization: float = 1e-4,
    seed: int = 0,
    nms_radius: int = 25,
) -> LinearDetector:
    x = np.asarray(patches, dtype=np.float64).reshape(len(patches), -1)
    y = np.asarray(labels, dtype=np.float64)
    if x.shape[1] != DETECTOR_SIZE * DETECTOR_SIZE:
        raise ValueError(f"patches must be 51x51, got {np.asarray(patches).shape[1:]}")
    if not ((y > 0).any() and (y < 0).any()):
        raise ValueError("train_linear needs at least one example per class (labels +1 / -1)")
    rng = np.random.default_rng(seed)
    w = np.zeros(x.shape[1])
    b = 0.0
    for _ in range(epochs):
        for i in rng.permutation(len(x)):
            violated = y[i] * (x[i] @ w + b) < 1.0
            w *= 1.0 - rate * regularization
            if violated:
                w += rate * y[i] * x[i]
                b += rate * y[i]
    positives = x[y > 0] @ w + b
    # score reached by 99.5% of the training positives; never above the SVM boundary
    delta = min(float(np.quantile(positives, 1.0 - RECALL_TARGET, method="lower")), 0.0)
    logger.info("linear detector trained on %d patches, delta=%.4f", len(x), delta)
    return LinearDetector(w.reshape(DETECTOR_SIZE, DETECTOR_SIZE), b, delta, nms_radius)


# ─── Verifiers ────────────────────────────────────────────────────────────────
class BaseVerifier(ABC):
    @abstractmethod
    def score(self, patch: np.ndarray, center: tuple[float, float]) -> float:
        """Person probability in [0, 1] for the 51x51x3 patch centered at `center`."""
        pass


class OracleVerifier(BaseVerifier):
    """
    Scores from synthetic ground truth: `hit_prob` within `radius` (Chebyshev, voxels)
    of a ground-truth root, `miss_prob` elsewhere. Ignores the patch.
    """
    def __init__(self, radius: int = 8, hit_prob: float = 1.0, miss_prob: float = 0.0):
        self.radius = radius
        self.hit_prob = hit_prob
        self.miss_prob = miss_prob
        self.roots = np.zeros((0, 2))

    def set_ground_truth(self, roots: np.ndarray) -> None:
        self.roots = np.asarray(roots, dtype=np.float64).reshape(-1, 2)

    def score(self, patch: np.ndarray, center: tuple[float, float]) -> float:
        if len(self.roots) == 0:
            return self.miss_prob
        dist = np.abs(self.roots - np.asarray(center, dtype=np.float64)).max(axis=1)
        return self.hit_prob if dist.min() <= self.radius else self.miss_prob


class LogisticVerifier(BaseVerifier):
    """Logistic regression on the flattened 51x51x3 patch."""
    def __init__(self, weights: np.ndarray, bias: float):
        self.weights = np.asarray(weights, dtype=np.float64).ravel()
        self.bias = float(bias)

    @classmethod
    def load(cls, path: Path) -> "LogisticVerifier":
        return cls(*model_io.load_logistic(path))

    def save(self, path: Path) -> None:
        model_io.save_logistic(path, self.weights, self.bias)

    def score(self, patch: np.ndarray, center: tuple[float, float]) -> float:
        return float(special.expit(np.asarray(patch, dtype=np.float64).ravel() @ self.weights + self.bias))


def train_logistic(
    patches: np.ndarray,
    labels: np.ndarray,
    epochs: int = 10,
    rate: float = 0.05,
    regularization: float = 1e-4,
    seed: int = 0,
) -> LogisticVerifier:
    x = np.asarray(patches, dtype=np.float64).reshape(len(patches), -1)
    y = (np.asarray(labels) > 0).astype(np.float64)
    if y.min() == y.max():
        raise ValueError("train_logistic needs both classes")
    rng = np.random.default_rng(seed)
    w = np.zeros(x.shape[1])
    b = 0.0
    for _ in range(epochs):
        for i in rng.permutation(len(x)):
            err = special.expit(x[i] @ w + b) - y[i]
            w -= rate * (err * x[i] + regularization * w)
            b -= rate * err
    return LogisticVerifier(w, b)


_VERIFIERS: dict[str, type[BaseVerifier]] = {
    "oracle": OracleVerifier,
    "logistic": LogisticVerifier,
}


def get_verifier(kind: str, path: Path | None = None, **kwargs: Any) -> BaseVerifier:
    verifier_class = _VERIFIERS.get(kind)
    if not verifier_class:
        raise ValueError(f"Unknown verifier: '{kind}'. Supported: {list(_VERIFIERS.keys())}")
    if verifier_class is LogisticVerifier:
        if path is None:
            raise ValueError("logistic verifier needs a model path")
        return LogisticVerifier.load(path)
    return verifier_class(**kwargs)


def verify(stacked: np.ndarray, proposals: list[Proposal], verifier: BaseVerifier, p_min: float = 0.5) -> list[Proposal]:
    verified = []
    for proposal in proposals:
        prob = verifier.score(extract_patch(stacked, proposal.xy, DETECTOR_SIZE), proposal.xy)
        verified.append(dataclasses.replace(proposal, person_prob=prob, accepted=prob >= p_min))
    return verified
