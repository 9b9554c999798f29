"""Character detection on slip scans: projection-profile segmentation,
reading-order recovery, and IoU-matched precision/recall evaluation.

The segmenter is a classical baseline; externally produced detections can
be evaluated through the same exchange format (``read_detections``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DataError
from .raster import moving_average, otsu_threshold, to_grayscale


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel box, origin top-left, continuous [x, x+w) extent."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise DataError(f"degenerate box: w={self.w}, h={self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def x_center(self) -> float:
        return self.x + self.w / 2

    @property
    def y_center(self) -> float:
        return self.y + self.h / 2

    def area(self) -> float:
        return self.w * self.h

    def to_list(self):
        return [self.x, self.y, self.w, self.h]


def iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area() + b.area() - inter)


@dataclass(frozen=True)
class SegmenterParams:
    """Projection-profile segmenter knobs.

    ``min_contrast`` (gray levels between the Otsu class means) guards
    against binarizing pure background texture into phantom ink.
    """

    smoothing_window: int = 5
    band_threshold: float = 0.08
    min_gap: int = 3
    min_height: int = 8
    column_gap_factor: float = 1.5
    min_contrast: float = 25.0

    def __post_init__(self):
        if self.smoothing_window < 1 or self.min_gap < 1 or self.min_height < 1:
            raise DataError("segmenter window, gap, and height must be positive")
        if not 0 < self.band_threshold < 1:
            raise DataError(f"band_threshold must be in (0, 1), got {self.band_threshold!r}")
        if self.column_gap_factor <= 0 or self.min_contrast < 0:
            raise DataError("column_gap_factor must be positive and min_contrast non-negative")


@dataclass(frozen=True)
class DetectionEvalConfig:
    iou_threshold: float = 0.5

    def __post_init__(self):
        if not 0 < self.iou_threshold <= 1:
            raise DataError(f"iou_threshold must be in (0, 1], got {self.iou_threshold!r}")


class DetectionScores(NamedTuple):
    precision: float
    recall: float
    f1: float


def _ink_mask(image: np.ndarray, params: SegmenterParams) -> np.ndarray | None:
    gray = to_grayscale(image)
    if gray.min() == gray.max():
        return None
    thr = otsu_threshold(gray)
    ink = gray <= thr
    if not ink.any() or ink.all():
        return None
    contrast = float(gray[~ink].mean()) - float(gray[ink].mean())
    if contrast < params.min_contrast:
        return None
    return ink


def segment_slip(image: np.ndarray, params: SegmenterParams = SegmenterParams()) -> list[BoundingBox]:
    """Find character boxes on a slip scan, top to bottom.

    Otsu-binarizes, thresholds the smoothed row-ink profile at
    ``band_threshold`` of its max, merges bands separated by less than
    ``min_gap`` rows, drops bands shorter than ``min_height``, then
    tightens each band to its ink extent. A blank strip yields no boxes.
    """
    ink = _ink_mask(image, params)
    if ink is None:
        return []
    raw_profile = ink.sum(axis=1).astype(np.float64)
    profile = moving_average(raw_profile, params.smoothing_window)
    thr = params.band_threshold * profile.max()
    active = profile > thr

    bands: list[list[int]] = []
    start = None
    for row, on in enumerate(active):
        if on and start is None:
            start = row
        elif not on and start is not None:
            bands.append([start, row - 1])
            start = None
    if start is not None:
        bands.append([start, len(active) - 1])

    merged: list[list[int]] = []
    for band in bands:
        if merged and band[0] - merged[-1][1] - 1 < params.min_gap:
            merged[-1][1] = band[1]
        else:
            merged.append(band)

    boxes: list[BoundingBox] = []
    for top, bottom in merged:
        if bottom - top + 1 < params.min_height:
            continue
        sub = ink[top:bottom + 1]
        col_profile = sub.sum(axis=0).astype(np.float64)
        if col_profile.max() <= 0:
            continue
        cols = np.nonzero(col_profile > params.band_threshold * col_profile.max())[0]
        if cols.size == 0:
            continue
        x0, x1 = int(cols[0]), int(cols[-1])
        row_extent = np.nonzero(sub[:, x0:x1 + 1].any(axis=1))[0]
        if row_extent.size == 0:
            continue
        y0 = top + int(row_extent[0])
        y1 = top + int(row_extent[-1])
        boxes.append(BoundingBox(x=x0, y=y0, w=x1 - x0 + 1, h=y1 - y0 + 1))
    return boxes


def reading_order(boxes: Sequence[BoundingBox], column_gap_factor: float = 1.5) -> list[int]:
    """Permutation of box indices in reading order.

    Boxes are clustered into columns by x-center (a gap wider than
    ``column_gap_factor`` times the median box width starts a new column);
    columns run right to left, and each column top to bottom. Ties keep
    input order.
    """
    if not boxes:
        return []
    widths = sorted(b.w for b in boxes)
    median_width = widths[len(widths) // 2] if len(widths) % 2 else (
        widths[len(widths) // 2 - 1] + widths[len(widths) // 2]) / 2
    gap = column_gap_factor * median_width
    by_center = sorted(range(len(boxes)), key=lambda i: (boxes[i].x_center, i))
    columns: list[list[int]] = [[by_center[0]]]
    for prev, idx in zip(by_center, by_center[1:]):
        if boxes[idx].x_center - boxes[prev].x_center > gap:
            columns.append([idx])
        else:
            columns[-1].append(idx)
    columns.sort(key=lambda col: (-(sum(boxes[i].x_center for i in col) / len(col)), col[0]))
    order: list[int] = []
    for col in columns:
        order.extend(sorted(col, key=lambda i: (boxes[i].y, i)))
    return order


def match_boxes(pred: Sequence[BoundingBox], gold: Sequence[BoundingBox],
                iou_threshold: float) -> list[tuple[int, int, float]]:
    """Greedy one-to-one matching in descending IoU over pairs >= threshold."""
    pairs = []
    for pi, p in enumerate(pred):
        for gi, g in enumerate(gold):
            score = iou(p, g)
            if score >= iou_threshold:
                pairs.append((score, pi, gi))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_pred: set[int] = set()
    used_gold: set[int] = set()
    matches = []
    for score, pi, gi in pairs:
        if pi in used_pred or gi in used_gold:
            continue
        used_pred.add(pi)
        used_gold.add(gi)
        matches.append((pi, gi, score))
    return matches


def detection_counts(pred: Sequence[BoundingBox], gold: Sequence[BoundingBox],
                     cfg: DetectionEvalConfig = DetectionEvalConfig()) -> tuple[int, int, int]:
    """(true positives, |pred|, |gold|) under greedy IoU matching."""
    return len(match_boxes(pred, gold, cfg.iou_threshold)), len(pred), len(gold)


def prf_from_counts(tp: int, n_pred: int, n_gold: int) -> DetectionScores:
    precision = tp / n_pred if n_pred else 1.0
    recall = tp / n_gold if n_gold else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return DetectionScores(precision, recall, f1)


def evaluate_detection(pred: Sequence[BoundingBox], gold: Sequence[BoundingBox],
                       cfg: DetectionEvalConfig = DetectionEvalConfig()) -> DetectionScores:
    """Precision/recall/F1 with greedy IoU matching; empty vs empty is perfect."""
    tp, n_pred, n_gold = detection_counts(pred, gold, cfg)
    return prf_from_counts(tp, n_pred, n_gold)


def evaluate_detection_files(pred_by_slip: dict[str, list[BoundingBox]],
                             gold_by_slip: dict[str, list[BoundingBox]],
                             cfg: DetectionEvalConfig = DetectionEvalConfig(),
                             ) -> tuple[DetectionScores, dict[str, DetectionScores]]:
    """Micro-aggregated scores across slips plus a per-slip breakdown."""
    tp_total = pred_total = gold_total = 0
    per_slip: dict[str, DetectionScores] = {}
    for slip_id in sorted(set(pred_by_slip) | set(gold_by_slip)):
        pred = pred_by_slip.get(slip_id, [])
        gold = gold_by_slip.get(slip_id, [])
        tp, n_pred, n_gold = detection_counts(pred, gold, cfg)
        tp_total += tp
        pred_total += n_pred
        gold_total += n_gold
        per_slip[slip_id] = prf_from_counts(tp, n_pred, n_gold)
    return prf_from_counts(tp_total, pred_total, gold_total), per_slip


def read_detections(path: str | Path) -> dict[str, list[BoundingBox]]:
    """Detection exchange file: JSONL of {"slip_id":..., "boxes":[[x,y,w,h],...]}."""
    result: dict[str, list[BoundingBox]] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"line {line_no}: invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict) or "slip_id" not in obj or "boxes" not in obj:
            raise DataError(f"line {line_no}: expected slip_id and boxes fields")
        slip_id = obj["slip_id"]
        if slip_id in result:
            raise DataError(f"line {line_no}: duplicate slip_id '{slip_id}'")
        try:
            result[slip_id] = [BoundingBox(*b) for b in obj["boxes"]]
        except (TypeError, DataError) as exc:
            raise DataError(f"line {line_no}: bad box: {exc}") from None
    return result


def write_detections(boxes_by_slip: dict[str, Iterable[BoundingBox]], path: str | Path) -> None:
    lines = []
    for slip_id in boxes_by_slip:
        record = {"slip_id": slip_id, "boxes": [b.to_list() for b in boxes_by_slip[slip_id]]}
        lines.append(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
