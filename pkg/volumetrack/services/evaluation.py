"""
Hand localization errors and tracking quality.
- Manhattan error in room voxel indices
- population mean / std, gross rate (> 20 voxels), unit-bin histogram with overflow
- greedy per-frame association of reported centers to ground-truth roots within a gate
- metrics.csv, histogram.csv, optional SVG bar chart
"""

import logging
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from volumetrack.exceptions import DataError
from volumetrack.models.evaluation import GROSS_ERROR, HISTOGRAM_MAX, ErrorRecord, Summary, TrackingMetrics
from volumetrack.models.hands import HANDS
from volumetrack.schemas.ground_truth import FrameTruth
from volumetrack.schemas.results import PersonResult

logger = logging.getLogger(__name__)


def manhattan_error(est: Sequence[int], gt: Sequence[int]) -> int:
    return int(sum(abs(int(a) - int(b)) for a, b in zip(est, gt)))


def summarize(records: Iterable[ErrorRecord] | Iterable[int]) -> Summary:
    errors = np.array([r.error if isinstance(r, ErrorRecord) else r for r in records], dtype=np.float64)
    if len(errors) == 0:
        raise ValueError("summarize needs at least one error record")
    bins = np.minimum(errors, HISTOGRAM_MAX + 1).astype(np.int64)
    histogram = np.bincount(bins, minlength=HISTOGRAM_MAX + 2)
    return Summary(
        mean=float(errors.mean()),
        std=float(errors.std()),
        gross_rate=float((errors > GROSS_ERROR).mean()),
        histogram=histogram,
        n=len(errors),
    )


# ─── Association ──────────────────────────────────────────────────────────────
def associate(
    reported: Sequence[tuple[float, float]], truth: Sequence[tuple[float, float]], gate: float = 10.0
) -> list[tuple[int, int]]:
    """Greedy nearest-first pairing (reported index, truth index) with Euclidean distance <= gate."""
    candidates = []
    for i, r in enumerate(reported):
        for j, g in enumerate(truth):
            d = float(np.hypot(r[0] - g[0], r[1] - g[1]))
            if d <= gate:
                candidates.append((d, i, j))
    candidates.sort()
    used_r, used_g, pairs = set(), set(), []
    for _, i, j in candidates:
        if i in used_r or j in used_g:
            continue
        used_r.add(i)
        used_g.add(j)
        pairs.append((i, j))
    return sorted(pairs)


def tracking_metrics(
    log: Iterable[tuple[int, int, float, float]],
    truth: Mapping[int, FrameTruth],
    gate: float = 10.0,
) -> TrackingMetrics:
    """`log` rows are (frame, track id, x, y); every ground-truth frame counts, reported or not."""
    by_frame: dict[int, list[tuple[int, float, float]]] = defaultdict(list)
    for frame, track_id, x, y in log:
        by_frame[int(frame)].append((int(track_id), float(x), float(y)))

    last_id: dict[int, int] = {}
    was_tracked: dict[int, bool] = {}
    associated_ids: set[int] = set()
    all_ids: set[int] = set()
    switches = fragments = matches = n_truth = n_reported = 0

    for frame in sorted(set(truth) | set(by_frame)):
        rows = by_frame.get(frame, [])
        people = truth[frame].people if frame in truth else []
        n_truth += len(people)
        n_reported += len(rows)
        all_ids.update(r[0] for r in rows)
        pairs = associate([(x, y) for _, x, y in rows], [p.root_xy for p in people], gate)
        matches += len(pairs)
        tracked_now = {}
        for i, j in pairs:
            tracked_now[people[j].id] = rows[i][0]
            associated_ids.add(rows[i][0])
        for person in people:
            pid = person.id
            if pid in tracked_now:
                if pid in last_id and last_id[pid] != tracked_now[pid]:
                    switches += 1
                if pid in was_tracked and not was_tracked[pid]:
                    fragments += 1
                last_id[pid] = tracked_now[pid]
                was_tracked[pid] = True
            elif pid in was_tracked:
                was_tracked[pid] = False

    return TrackingMetrics(
        accuracy=matches / n_reported if n_reported else 1.0,
        recall=matches / n_truth if n_truth else 1.0,
        id_switches=switches,
        fragmentations=fragments,
        false_tracks=len(all_ids - associated_ids),
        matches=matches,
        n_truth=n_truth,
        n_reported=n_reported,
    )


def hand_errors(
    results: Iterable[PersonResult],
    truth: Mapping[int, FrameTruth],
    gate: float = 10.0,
    gt_mode: str = "center",
) -> list[ErrorRecord]:
    """Ground truth is associated separately for every (method, frame) group."""
    groups: dict[tuple[str, int], list[PersonResult]] = defaultdict(list)
    for r in results:
        groups[(r.method, r.frame)].append(r)
    records = []
    for method, frame in sorted(groups):
        if frame not in truth:
            continue
        rows = groups[(method, frame)]
        people = truth[frame].people
        for i, j in associate([r.center for r in rows], [p.root_xy for p in people], gate):
            r, person = rows[i], people[j]
            for side in HANDS:
                gt = person.room_voxel(side, gt_mode)
                est = r.hand(side)
                records.append(
                    ErrorRecord(frame, person.id, side, est.room, gt, manhattan_error(est.room, gt), est.missing, r.method)
                )
    return records


# ─── IO ───────────────────────────────────────────────────────────────────────
def read_results(path: Path) -> list[PersonResult]:
    results = []
    try:
        with Path(path).open() as fh:
            for lineno, line in enumerate(fh, start=1):
                if line.strip():
                    results.append(PersonResult.model_validate_json(line))
    except OSError as e:
        raise DataError(f"cannot read results {path}: {e}") from e
    except ValidationError as e:
        raise DataError(f"{path}:{lineno}: {e}") from e
    return results


def metrics_table(records: Sequence[ErrorRecord]) -> pd.DataFrame:
    rows = []
    methods = sorted({r.method for r in records})
    for method in methods:
        for hand in (*HANDS, "both"):
            subset = [r for r in records if r.method == method and (hand == "both" or r.hand == hand)]
            if not subset:
                continue
            s = summarize(subset)
            rows.append({"method": method, "hand": hand, "mean": s.mean, "std": s.std, "gross_rate": s.gross_rate, "n": s.n})
    return pd.DataFrame(rows, columns=["method", "hand", "mean", "std", "gross_rate", "n"])


def write_metrics_csv(path: Path, records: Sequence[ErrorRecord]) -> pd.DataFrame:
    table = metrics_table(records)
    table.to_csv(path, index=False, float_format="%.6f")
    return table


def write_histogram_csv(path: Path, summary: Summary) -> None:
    bins = [str(b) for b in range(HISTOGRAM_MAX + 1)] + [f">{HISTOGRAM_MAX}"]
    pd.DataFrame({"bin": bins, "count": summary.histogram}).to_csv(path, index=False)


def plot_histogram(path: Path, summary: Summary, title: str = "hand localization error") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 3))
    ax.bar(np.arange(len(summary.histogram)), summary.histogram, width=0.9, color="tab:blue")
    ax.axvline(GROSS_ERROR + 0.5, color="tab:red", linestyle="--", linewidth=1)
    ax.set_xlabel("Manhattan error (voxels); last bin > %d" % HISTOGRAM_MAX)
    ax.set_ylabel("count")
    ax.set_title(f"{title} (n={summary.n}, mean={summary.mean:.2f}, std={summary.std:.2f})")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
