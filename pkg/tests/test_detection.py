import numpy as np
import pytest

from volumetrack.exceptions import ModelFormatError
from volumetrack.models.detection import DETECTOR_SIZE, LinearDetector, Proposal
from volumetrack.services.detection import (
    LogisticVerifier,
    OracleVerifier,
    bell_template_detector,
    get_verifier,
    linear_score_map,
    propose,
    train_linear,
    train_logistic,
    verify,
)
from volumetrack.utils.model_io import decode_detector, encode_detector, load_detector, save_detector


def _bump(shape, center, height=1.0, sigma=3.0):
    x, y = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")
    return height * np.exp(-((x - center[0]) ** 2 + (y - center[1]) ** 2) / (2 * sigma**2))


def _toy_patches(rng, n=40):
    positives = rng.uniform(0.0, 0.1, size=(n, DETECTOR_SIZE, DETECTOR_SIZE))
    positives[:, 20:31, 20:31] += 1.0
    negatives = rng.uniform(0.0, 0.1, size=(n, DETECTOR_SIZE, DETECTOR_SIZE))
    patches = np.concatenate([positives, negatives])
    labels = np.concatenate([np.ones(n), -np.ones(n)])
    return patches, labels


def _detector(delta=0.0, nms_radius=25):
    return LinearDetector(np.zeros((DETECTOR_SIZE, DETECTOR_SIZE)), 0.0, delta, nms_radius)


def test_detector_rejects_wrong_weight_shape():
    with pytest.raises(ValueError):
        LinearDetector(np.zeros((50, 51)), 0.0)


def test_linear_score_map_matches_direct_sum(rng):
    f = rng.random((70, 60))
    det = LinearDetector(rng.standard_normal((DETECTOR_SIZE, DETECTOR_SIZE)), 0.25)
    scores = linear_score_map(f, det)
    padded = np.pad(f, 25)
    for x, y in [(0, 0), (35, 30), (69, 59), (10, 55)]:
        window = padded[x : x + DETECTOR_SIZE, y : y + DETECTOR_SIZE]
        assert scores[x, y] == pytest.approx(float((window * det.weights).sum()) + 0.25, abs=1e-8)


def test_single_bump_gives_one_proposal():
    proposals = propose(_bump((100, 100), (40, 60)), _detector(delta=0.1))
    assert [p.xy for p in proposals] == [(40, 60)]


def test_nearby_bumps_are_suppressed():
    score = np.maximum(_bump((100, 100), (40, 40), 1.0, 2.0), _bump((100, 100), (50, 40), 0.8, 2.0))
    proposals = propose(score, _detector(delta=0.1, nms_radius=25))
    assert [p.xy for p in proposals] == [(40, 40)]


def test_distant_bumps_both_kept():
    score = np.maximum(_bump((120, 120), (20, 20), 0.7), _bump((120, 120), (90, 90), 0.9))
    proposals = propose(score, _detector(delta=0.1))
    assert [p.xy for p in proposals] == [(90, 90), (20, 20)]
    assert proposals[0].linear_score > proposals[1].linear_score


def test_propose_matches_greedy_oracle(rng):
    score = rng.standard_normal((60, 60))
    det = _detector(delta=0.5, nms_radius=6)
    proposals = propose(score, det)

    candidates = []
    for x in range(60):
        for y in range(60):
            window = score[max(x - 1, 0) : x + 2, max(y - 1, 0) : y + 2]
            if score[x, y] > det.delta and score[x, y] >= window.max():
                candidates.append((x, y))
    candidates.sort(key=lambda p: -score[p])
    kept = []
    for x, y in candidates:
        if all(max(abs(x - kx), abs(y - ky)) > 6 for kx, ky in kept):
            kept.append((x, y))
    assert [p.xy for p in proposals] == kept


def test_bell_template_is_zero_mean():
    det = bell_template_detector()
    assert det.weights.sum() == pytest.approx(0.0, abs=1e-12)
    assert det.weights[25, 25] == det.weights.max()


def test_train_linear_separable(rng):
    patches, labels = _toy_patches(rng)
    det = train_linear(patches, labels, epochs=20, rate=1e-2)
    scores = patches.reshape(len(patches), -1) @ det.weights.ravel() + det.bias
    assert (np.sign(scores) == labels).all()
    assert det.delta <= 0.0
    assert (scores[labels > 0] > det.delta).mean() >= 0.99


def test_train_linear_flipped_labels_negate(rng):
    patches, labels = _toy_patches(rng, n=10)
    a = train_linear(patches, labels, epochs=3, seed=5)
    b = train_linear(patches, -labels, epochs=3, seed=5)
    np.testing.assert_allclose(b.weights, -a.weights, atol=1e-12)
    assert b.bias == pytest.approx(-a.bias)


def test_train_linear_needs_both_classes(rng):
    patches, _ = _toy_patches(rng, n=3)
    with pytest.raises(ValueError):
        train_linear(patches, np.ones(len(patches)))


def test_oracle_verifier_scores_by_distance():
    oracle = OracleVerifier(radius=8)
    oracle.set_ground_truth([[100, 100]])
    assert oracle.score(np.zeros((51, 51, 3)), (100, 100)) == 1.0
    assert oracle.score(np.zeros((51, 51, 3)), (108, 92)) == 1.0
    assert oracle.score(np.zeros((51, 51, 3)), (300, 10)) == 0.0


def test_oracle_verifier_without_truth_misses():
    assert OracleVerifier(miss_prob=0.1).score(np.zeros((51, 51, 3)), (0, 0)) == 0.1


def test_train_logistic_separable(rng, tmp_path):
    patches, labels = _toy_patches(rng)
    stacked = np.repeat(patches[..., None], 3, axis=-1)
    verifier = train_logistic(stacked, labels, epochs=5)
    probs = np.array([verifier.score(p, (0, 0)) for p in stacked])
    assert ((probs >= 0.5) == (labels > 0)).all()

    verifier.save(tmp_path / "verifier.vtlv")
    loaded = get_verifier("logistic", tmp_path / "verifier.vtlv")
    assert isinstance(loaded, LogisticVerifier)
    assert loaded.score(stacked[0], (0, 0)) == pytest.approx(probs[0], abs=1e-4)


def test_get_verifier_unknown():
    with pytest.raises(ValueError, match="Unknown verifier"):
        get_verifier("alexnet")


def test_verify_sets_probability_and_acceptance():
    oracle = OracleVerifier()
    oracle.set_ground_truth([[30, 30]])
    stacked = np.zeros((100, 100, 3), dtype=np.float32)
    proposals = [Proposal((30, 31), 1.2), Proposal((80, 80), 0.4)]
    verified = verify(stacked, proposals, oracle, p_min=0.5)
    assert [(p.person_prob, p.accepted) for p in verified] == [(1.0, True), (0.0, False)]
    assert proposals[0].person_prob is None


def test_detector_file_round_trip(tmp_path, rng):
    det = LinearDetector(rng.standard_normal((DETECTOR_SIZE, DETECTOR_SIZE)), 0.5, -0.25)
    save_detector(tmp_path / "d.vtld", det)
    loaded = load_detector(tmp_path / "d.vtld")
    np.testing.assert_allclose(loaded.weights, det.weights, rtol=1e-6)
    assert loaded.delta == pytest.approx(-0.25)


def test_detector_file_rejects_garbage():
    with pytest.raises(ModelFormatError):
        decode_detector(b"VTLX" + encode_detector(bell_template_detector())[4:])


def test_lowering_delta_only_adds_proposals(rng):
    score = rng.standard_normal((60, 60))
    previous: set = set()
    for delta in (1.5, 1.0, 0.5, 0.0, -0.5):
        current = {p.xy for p in propose(score, _detector(delta=delta, nms_radius=6))}
        assert previous <= current
        previous = current


def test_score_map_translation_equivariance(rng):
    big = rng.random((100, 90))
    det = LinearDetector(rng.standard_normal((DETECTOR_SIZE, DETECTOR_SIZE)), 0.1)
    dx, dy = 3, 5
    base = linear_score_map(big[:70, :60], det)
    shifted = linear_score_map(big[dx : dx + 70, dy : dy + 60], det)
    np.testing.assert_allclose(shifted[25 : 45 - dx, 25 : 35 - dy], base[25 + dx : 45, 25 + dy : 35], atol=1e-9)
