"""Benchmark protocol: per-scan matching, global PR curve, AP/Peak-F1/EER,
latency measurement and report serialization.

Detection JSON schema (shared by all detectors)::

    {"schema_version": 1,
     "detector": "...",
     "detections": [{"scan_index": 0, "score": 0.9, "x": 1.0, "y": 2.0}, ...]}

Report JSON: one entry per association distance with the metric values and
the PR curve points.
"""

from __future__ import annotations

import json
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DETECTION_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1

SCORE_MIN = 0.01
RANGE_MAX = 10.0
DEFAULT_D_LIST = (0.5, 0.3)


@dataclass(frozen=True)
class Detection:
    scan_index: int
    score: float
    x: float
    y: float


@dataclass(frozen=True)
class PRPoint:
    threshold: float
    precision: float
    recall: float
    tp: int
    fp: int


@dataclass(frozen=True)
class PRCurve:
    points: list[PRPoint]
    total_gt: int


def filter_detections(dets, score_min=SCORE_MIN, range_max=RANGE_MAX):
    """Drop very low confidence detections and those beyond the range cutoff."""
    return [
        d for d in dets
        if d.score >= score_min and (d.x**2 + d.y**2) <= range_max**2
    ]


def match_scan(dets, gts, d: float) -> list[bool]:
    """Label each detection TP/FP within one scan.

    Detections are processed in descending score (ties by input order);
    each claims its nearest unclaimed ground truth within d, otherwise it
    is a false positive. Ground-truth ties are broken by index.
    """
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    claimed = [False] * len(gts)
    labels = [False] * len(dets)
    for i in order:
        det = dets[i]
        best_j, best_d = -1, float("inf")
        for j, gt in enumerate(gts):
            if claimed[j]:
                continue
            dist = ((det.x - gt[0]) ** 2 + (det.y - gt[1]) ** 2) ** 0.5
            if dist < best_d:
                best_j, best_d = j, dist
        if best_j >= 0 and best_d <= d:
            claimed[best_j] = True
            labels[i] = True
    return labels


def match_scan_multipass(dets, gts, d: float) -> list[bool]:
    """Literal multi-pass reading of the matching procedure, used as an
    independent oracle for match_scan.

    Rounds of simultaneous matching: every unresolved detection proposes to
    its nearest unclaimed ground truth within d; per ground truth, the
    highest-confidence proposer wins (higher-confidence detections are
    prioritized even when a lower-confidence one is closer); detections
    whose nearest unclaimed ground truth is beyond d become FP. Repeats
    until all detections are resolved.
    """
    n = len(dets)
    labels = [False] * n
    resolved = [False] * n
    claimed = [False] * len(gts)
    order = sorted(range(n), key=lambda i: -dets[i].score)
    rank = {i: k for k, i in enumerate(order)}
    while not all(resolved):
        proposals: dict[int, list[int]] = {}
        for i in range(n):
            if resolved[i]:
                continue
            best_j, best_d = -1, float("inf")
            for j, gt in enumerate(gts):
                if claimed[j]:
                    continue
                dist = ((dets[i].x - gt[0]) ** 2 + (dets[i].y - gt[1]) ** 2) ** 0.5
                if dist < best_d:
                    best_j, best_d = j, dist
            if best_j < 0 or best_d > d:
                resolved[i] = True  # FP
            else:
                proposals.setdefault(best_j, []).append(i)
        for j, cands in proposals.items():
            winner = min(cands, key=lambda i: rank[i])
            claimed[j] = True
            labels[winner] = True
            resolved[winner] = True
    return labels


def pr_curve(labeled, total_gt: int) -> PRCurve:
    """Global PR aggregation over (score, is_tp) pairs across all scans.

    Traverses detections in descending score; groups sharing a score
    collapse into a single curve point.
    """
    if total_gt <= 0:
        raise ValueError("total_gt must be positive")
    ordered = sorted(labeled, key=lambda st: -st[0])
    points = []
    tp = fp = 0
    for k, (score, is_tp) in enumerate(ordered):
        if is_tp:
            tp += 1
        else:
            fp += 1
        if k + 1 < len(ordered) and ordered[k + 1][0] == score:
            continue
        points.append(
            PRPoint(
                threshold=score,
                precision=tp / (tp + fp),
                recall=tp / total_gt,
                tp=tp,
                fp=fp,
            )
        )
    return PRCurve(points=points, total_gt=total_gt)


def average_precision_11pt(curve: PRCurve) -> float:
    """11-recall-point interpolated AP: mean over r in {0.0, 0.1, ..., 1.0}
    of the best precision at recall >= r (0 when unreached)."""
    if not curve.points:
        return 0.0
    rec = np.array([p.recall for p in curve.points])
    prec = np.array([p.precision for p in curve.points])
    total = 0.0
    for r in np.linspace(0.0, 1.0, 11):
        at_least = prec[rec >= r - 1e-12]
        total += at_least.max() if at_least.size else 0.0
    return total / 11.0


def peak_f1(curve: PRCurve) -> float:
    """Maximum F1 along the curve; 0 for an empty curve."""
    best = 0.0
    for p in curve.points:
        if p.precision + p.recall > 0:
            best = max(best, 2 * p.precision * p.recall / (p.precision + p.recall))
    return best


def eer(curve: PRCurve) -> float:
    """(P+R)/2 at the curve point where precision is closest to recall;
    ties go to the point with higher F1."""
    if not curve.points:
        return 0.0
    def key(p: PRPoint):
        f1 = 2 * p.precision * p.recall / (p.precision + p.recall) \
            if p.precision + p.recall else 0.0
        return (abs(p.precision - p.recall), -f1)
    best = min(curve.points, key=key)
    return (best.precision + best.recall) / 2.0


def evaluate_detections(
    per_scan_dets: dict[int, list[Detection]],
    per_scan_gts: dict[int, list[tuple[float, float]]],
    d_list=DEFAULT_D_LIST,
    detector_name: str = "unknown",
) -> dict:
    """Full protocol: filter, per-scan matching, global curve, metrics.

    per_scan_gts maps scan index to ground-truth centers; scans with no
    entry in per_scan_dets contribute zero detections.
    """
    total_gt = sum(len(g) for g in per_scan_gts.values())
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "detector": detector_name,
        "total_gt": total_gt,
        "results": [],
    }
    for d in d_list:
        labeled = []
        for i, gts in per_scan_gts.items():
            dets = filter_detections(per_scan_dets.get(i, []))
            labels = match_scan(dets, gts, d)
            labeled.extend((det.score, lab) for det, lab in zip(dets, labels))
        curve = pr_curve(labeled, total_gt) if total_gt else PRCurve([], 0)
        report["results"].append(
            {
                "association_distance": d,
                "ap": average_precision_11pt(curve),
                "peak_f1": peak_f1(curve),
                "eer": eer(curve),
                "curve": [
                    {
                        "threshold": p.threshold,
                        "precision": p.precision,
                        "recall": p.recall,
                        "tp": p.tp,
                        "fp": p.fp,
                    }
                    for p in curve.points
                ],
            }
        )
    return report


def latency_bench(detector, scans, repetitions: int = 1, warmup: int = 50) -> dict:
    """Sequential single-threaded per-scan wall-clock statistics.

    detector is a callable taking one scan. The first `warmup` calls are
    excluded from the statistics.
    """
    scans = list(scans)
    for scan in scans[:warmup]:
        detector(scan)
    times = []
    for _ in range(repetitions):
        for scan in scans:
            t0 = time.perf_counter()
            detector(scan)
            times.append(time.perf_counter() - t0)
    times.sort()
    return {
        "count": len(times),
        "mean_s": statistics.fmean(times),
        "median_s": statistics.median(times),
        "p99_s": times[min(len(times) - 1, int(0.99 * len(times)))],
    }


# --- detection / report file IO -------------------------------------------


def save_detections(path, per_scan: dict[int, list], detector_name: str) -> None:
    records = []
    for i in sorted(per_scan):
        for det in per_scan[i]:
            records.append(
                {"scan_index": i, "score": float(det.score),
                 "x": float(det.x), "y": float(det.y)}
            )
    doc = {
        "schema_version": DETECTION_SCHEMA_VERSION,
        "detector": detector_name,
        "detections": records,
    }
    Path(path).write_text(json.dumps(doc))


def load_detections(path) -> tuple[dict[int, list[Detection]], str]:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != DETECTION_SCHEMA_VERSION:
        raise ValueError(f"unsupported detection schema {doc.get('schema_version')}")
    per_scan: dict[int, list[Detection]] = {}
    for rec in doc["detections"]:
        det = Detection(
            scan_index=int(rec["scan_index"]), score=float(rec["score"]),
            x=float(rec["x"]), y=float(rec["y"]),
        )
        per_scan.setdefault(det.scan_index, []).append(det)
    return per_scan, doc.get("detector", "unknown")
