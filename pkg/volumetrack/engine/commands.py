"""
Pipeline commands shared by the CLI and the stage handlers.
Each returns a plain dict of what it wrote, so stage outputs can feed later stages.
"""

import dataclasses
import json
import logging
import math
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from volumetrack.config import RunConfig
from volumetrack.engine.pipeline import STAGES, FramePipeline
from volumetrack.exceptions import ConfigError, DataError
from volumetrack.models.hands import FALLBACK_XYZ, HANDS
from volumetrack.models.volume import GridSpec
from volumetrack.schemas.results import HandResult, PersonResult
from volumetrack.schemas.scene import DatasetMeta
from volumetrack.services import detection, evaluation, synth, triangulation
from volumetrack.services.projection import feature_maps_from_voxels
from volumetrack.services.tracking import write_track_log
from volumetrack.services.volume import person_volume_from_voxels, quantize_frame
from volumetrack.utils import model_io
from volumetrack.utils.pgm import write_pgm16
from volumetrack.utils.pointcloud_io import read_frame
from volumetrack.utils.seeding import keyed_rng

logger = logging.getLogger(__name__)

BASELINE_METHODS = ("robust", "lsq")


def resolve_grid(config: RunConfig, meta: Optional[DatasetMeta]) -> GridSpec:
    """Config grid fields win over the dataset meta."""
    if meta is None and None in (config.grid_origin, config.voxel_size, config.grid_dims):
        raise ConfigError("grid_origin, voxel_size and grid_dims are required without a dataset meta.json")
    return GridSpec(
        origin=config.grid_origin if config.grid_origin is not None else meta.grid_origin,
        voxel_size=config.voxel_size if config.voxel_size is not None else meta.voxel_size,
        dims=config.grid_dims if config.grid_dims is not None else meta.grid_dims,
        ground_z=config.ground_z if config.ground_z is not None else (meta.ground_z if meta else 1),
    )


def _ground_truth(dataset_dir: Path) -> dict:
    path = Path(dataset_dir) / "gt.jsonl"
    return synth.read_ground_truth(path) if path.exists() else {}


# ─── generate ─────────────────────────────────────────────────────────────────
def cmd_generate(script_path: Path, out_dir: Path, seed: Optional[int] = None) -> dict:
    script = synth.load_script(script_path)
    if seed is not None:
        script = script.model_copy(update={"seed": seed})
    meta = synth.write_dataset(script, out_dir)
    return {"dataset_dir": str(out_dir), "frames": meta.frames, "people": meta.people}


# ─── train ────────────────────────────────────────────────────────────────────
def cmd_train(
    dataset_dir: Path,
    out_model: Path,
    config: RunConfig,
    holdout: float = 0.25,
    epochs: int = 10,
    negatives_per_frame: int = 4,
    augment: bool = True,
) -> dict:
    dataset_dir, out_model = Path(dataset_dir), Path(out_model)
    meta = synth.load_meta(dataset_dir)
    grid = resolve_grid(config, meta)
    truth = _ground_truth(dataset_dir)
    if not truth:
        raise DataError(f"{dataset_dir} has no ground truth to train from")

    identities = sorted(meta.people)
    order = keyed_rng(config.seed, 0).permutation(len(identities))
    n_held = math.ceil(holdout * len(identities)) if len(identities) > 1 else 0
    held_ids = {identities[k] for k in order[:n_held]}

    def pairs():
        for cloud in synth.iter_frames(dataset_dir):
            if cloud.timestamp_index in truth:
                yield cloud, truth[cloud.timestamp_index]

    data = synth.make_training_set(pairs(), grid, config.seed, negatives_per_frame, augment=augment)
    frame_held = np.array([keyed_rng(config.seed, 1, int(f)).random() < holdout for f in data.frames], dtype=bool)
    held = np.where(data.labels > 0, np.isin(data.identities, list(held_ids)), frame_held)
    train = ~held
    if not ((data.labels[train] > 0).any() and (data.labels[train] < 0).any()):
        raise DataError("insufficient data: training split needs both person and background patches")

    det = detection.train_linear(data.f_t[train], data.labels[train], epochs=epochs, seed=config.seed)
    verifier = detection.train_logistic(data.stacked[train], data.labels[train], epochs=epochs, seed=config.seed)
    out_model.parent.mkdir(parents=True, exist_ok=True)
    model_io.save_detector(out_model, det)
    verifier_path = out_model.with_suffix(".vtlv")
    verifier.save(verifier_path)

    report: dict = {
        "train_identities": [i for i in identities if i not in held_ids],
        "held_out_identities": sorted(held_ids),
        "n_train": int(train.sum()),
        "n_held_out": int(held.sum()),
        "delta": det.delta,
        "bias": det.bias,
    }
    held_pos = held & (data.labels > 0)
    if held_pos.any():
        scores = data.f_t[held_pos].reshape(int(held_pos.sum()), -1) @ det.weights.ravel() + det.bias
        report["held_out_recall_at_delta"] = float((scores > det.delta).mean())
    if held.any():
        probs = np.array([verifier.score(p, (25, 25)) for p in data.stacked[held]])
        report["verifier_accuracy"] = float(((probs >= config.p_min) == (data.labels[held] > 0)).mean())
        if held_pos.any():
            report["verifier_recall"] = float((probs[data.labels[held] > 0] >= config.p_min).mean())
    report_path = out_model.parent / "train_report.json"
    report_path.write_text(json.dumps(report, indent=2))

    views_path = out_model.parent / "hand_views.npz"
    top = [k for k, m in enumerate(data.hand_modes) if m == "topdown"]
    side = [k for k, m in enumerate(data.hand_modes) if m == "side"]
    np.savez_compressed(
        views_path,
        topdown_images=np.asarray([data.hand_images[k] for k in top], dtype=np.float32).reshape(-1, 80, 80, 3),
        topdown_labels=np.asarray([data.hand_labels[k] for k in top], dtype=np.uint8).reshape(-1, 80, 80),
        side_images=np.asarray([data.hand_images[k] for k in side], dtype=np.float32).reshape(-1, 41, grid.dims[2], 3),
        side_labels=np.asarray([data.hand_labels[k] for k in side], dtype=np.uint8).reshape(-1, 41, grid.dims[2]),
    )
    logger.info("detector written to %s (delta=%.4f), verifier to %s", out_model, det.delta, verifier_path)
    return {
        "detector_path": str(out_model),
        "verifier_path": str(verifier_path),
        "report_path": str(report_path),
        "hand_views_path": str(views_path),
        **{k: v for k, v in report.items() if k.startswith(("held_out_recall", "verifier_", "delta"))},
    }


# ─── track ────────────────────────────────────────────────────────────────────
def cmd_track(dataset_dir: Path, out_path: Path, config: RunConfig, threads: int = 1) -> dict:
    dataset_dir, out_path = Path(dataset_dir), Path(out_path)
    meta_file = dataset_dir / "meta.json"
    meta = synth.load_meta(dataset_dir) if meta_file.exists() else None
    grid = resolve_grid(config, meta)
    truth = _ground_truth(dataset_dir)
    pipeline = FramePipeline(config, grid, threads=threads, method=config.segmenter)

    out_path.parent.mkdir(parents=True, exist_ok=True)
    tracks_path = out_path.with_name("tracks.jsonl")
    tracks_path.write_text("")
    stage_ms = {s: 0.0 for s in STAGES}
    localize_ms: list[float] = []
    frames = results = 0
    started = time.perf_counter()
    with out_path.open("w") as fh:
        for cloud in synth.iter_frames(dataset_dir):
            output = pipeline.process(cloud, truth.get(cloud.timestamp_index))
            for r in output.results:
                fh.write(r.model_dump_json() + "\n")
            write_track_log(tracks_path, output.reported)
            for stage, ms in output.stage_ms.items():
                stage_ms[stage] += ms
            localize_ms.extend(output.localize_ms)
            frames += 1
            results += len(output.results)
    elapsed = time.perf_counter() - started
    fps = frames / elapsed if elapsed > 0 else 0.0

    report = {
        "frames": frames,
        "results": results,
        "elapsed_s": elapsed,
        "fps": fps,
        "median_localize_ms": float(np.median(localize_ms)) if localize_ms else None,
        "stage_ms": stage_ms,
        "detector": pipeline.detector_source,
        "verifier": config.verifier,
        "segmenter": config.segmenter,
    }
    report_path = out_path.with_name("report.json")
    report_path.write_text(json.dumps(report, indent=2))
    logger.info("tracked %d frames at %.1f fps, %d person results", frames, fps, results)
    return {"results_path": str(out_path), "tracks_path": str(tracks_path), "report_path": str(report_path), "frames": frames, "fps": fps}


# ─── baseline ─────────────────────────────────────────────────────────────────
def _fallback_hand(grid: GridSpec, offset: Sequence[int]) -> HandResult:
    room = tuple(int(a + b) for a, b in zip(FALLBACK_XYZ, offset))
    return HandResult(local=FALLBACK_XYZ, room=room, world=tuple(float(c) for c in grid.voxel_to_world(room)), missing=True)


def cmd_baseline_triangulate(dataset_dir: Path, out_path: Path, config: RunConfig) -> dict:
    dataset_dir, out_path = Path(dataset_dir), Path(out_path)
    meta = synth.load_meta(dataset_dir)
    grid = resolve_grid(config, meta)
    truth = _ground_truth(dataset_dir)
    if config.rig_path is not None:
        cams = triangulation.load_rig(config.rig_path)
    else:
        extent = np.asarray(grid.dims[:2]) * grid.voxel_size
        cams = triangulation.default_rig(grid.origin_array[:2] + extent / 2)
    if not cams:
        raise ConfigError("camera rig is empty")
    method = config.baseline_method

    out_path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with out_path.open("w") as fh:
        for cloud in synth.iter_frames(dataset_dir):
            frame = cloud.timestamp_index
            if frame not in truth:
                raise DataError(f"no ground truth for frame {frame}; the baseline needs GT keypoints")
            vf = quantize_frame(cloud, grid)
            for person in truth[frame].people:
                volume = person_volume_from_voxels(vf, person.root_xy)
                offset = np.asarray(person.volume_offset)
                hands_out = {}
                for k, side in enumerate(HANDS):
                    rng = keyed_rng(config.seed, frame, person.id, k)
                    kps = triangulation.synthesize_keypoints(
                        cams, np.asarray(person.hand(side).center_world), rng,
                        config.noise_px, config.outlier_rate, config.outlier_px, config.outlier_view,
                    )
                    present = sum(kp.present for kp in kps)
                    if method == "lsq" and present >= 2:
                        room = grid.world_to_voxel(triangulation.least_squares_triangulate(cams, kps))
                        local = tuple(int(c) for c in room - offset)
                    elif method == "robust" and present >= 1 and volume.count() > 0:
                        local = triangulation.robust_triangulate(
                            volume, volume.spec, cams, kps, config.tau, search=config.search, dilation=config.dilation
                        )
                    else:
                        hands_out[side] = _fallback_hand(grid, offset)
                        continue
                    room = tuple(int(a + b) for a, b in zip(local, offset))
                    hands_out[side] = HandResult(
                        local=local, room=room, world=tuple(float(c) for c in grid.voxel_to_world(room))
                    )
                result = PersonResult(
                    frame=frame,
                    track_id=person.id,
                    method=method,
                    center=person.root_xy,
                    person_score=1.0,
                    left=hands_out["left"],
                    right=hands_out["right"],
                )
                fh.write(result.model_dump_json() + "\n")
                count += 1
    logger.info("%s baseline wrote %d person results to %s", method, count, out_path)
    return {"results_path": str(out_path), "results": count}


# ─── eval ─────────────────────────────────────────────────────────────────────
def cmd_eval(results_paths: Sequence[Path], gt_path: Path, out_dir: Path, config: RunConfig) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    truth = synth.read_ground_truth(gt_path)
    results = [r for p in results_paths for r in evaluation.read_results(p)]
    records = evaluation.hand_errors(results, truth, config.gt_gate, config.gt_mode)
    if not records:
        raise DataError("no results could be joined with the ground truth")

    metrics_path = out_dir / "metrics.csv"
    table = evaluation.write_metrics_csv(metrics_path, records)
    written = {"metrics_path": str(metrics_path)}
    methods = sorted({r.method for r in records})
    for method in methods:
        summary = evaluation.summarize([r for r in records if r.method == method])
        name = "histogram.csv" if len(methods) == 1 else f"histogram_{method}.csv"
        evaluation.write_histogram_csv(out_dir / name, summary)
        written[f"histogram_{method}"] = str(out_dir / name)
        if config.svg:
            svg = out_dir / name.replace(".csv", ".svg")
            evaluation.plot_histogram(svg, summary, title=f"{method} hand localization error")
            written[f"svg_{method}"] = str(svg)

    tracked_methods = sorted({r.method for r in results} - set(BASELINE_METHODS))
    for method in tracked_methods:
        log = ((r.frame, r.track_id, *r.center) for r in results if r.method == method)
        tm = evaluation.tracking_metrics(log, truth, config.gt_gate)
        name = "tracking.json" if len(tracked_methods) == 1 else f"tracking_{method}.json"
        (out_dir / name).write_text(json.dumps(dataclasses.asdict(tm), indent=2))
        written["tracking_path" if len(tracked_methods) == 1 else f"tracking_{method}"] = str(out_dir / name)

    both = table[table["hand"] == "both"]
    for row in both.itertuples():
        logger.info("%s: mean %.3f, std %.3f, gross %.4f, n=%d", row.method, row.mean, row.std, row.gross_rate, row.n)
    written["mean_error"] = {row.method: float(row.mean) for row in both.itertuples()}
    return written


# ─── features ─────────────────────────────────────────────────────────────────
def cmd_features(frame_path: Path, out_dir: Path, config: RunConfig) -> dict:
    frame_path, out_dir = Path(frame_path), Path(out_dir)
    meta_file = frame_path.parent.parent / "meta.json"
    meta = synth.load_meta(meta_file.parent) if meta_file.exists() else None
    grid = resolve_grid(config, meta)
    maps = feature_maps_from_voxels(quantize_frame(read_frame(frame_path), grid))
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for name in ("f_t", "f_s", "f_b"):
        path = out_dir / f"{frame_path.stem}_{name}.pgm"
        write_pgm16(path, getattr(maps, name), scale=1.0)
        written[name] = str(path)
    return written
