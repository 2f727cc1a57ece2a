"""Tagging accuracy, confusion-matrix mIoU and the lane boundary score."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMetricError, EmptySplitError, ShapeError, ValidationError
from .geometry import dilate
from .labels import (
    IGNORE_INDEX,
    LANE_CATEGORIES,
    LANE_DIRECTIONS,
    LANE_STYLES,
    Frame,
    FrameSet,
    SemanticMap,
    rasterize_poly2d,
)
from .pool import parallel_map


@dataclass
class TaskScore:
    task: str
    value: float
    breakdown: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.value) or not (0.0 <= self.value <= 100.0):
            raise ValidationError(f"score {self.value} outside [0, 100]")


def tagging_accuracy(
    preds: FrameSet,
    gts: FrameSet,
    attribute: str,
    exclude_undefined_gt: bool = False,
) -> TaskScore:
    """Top-1 accuracy over gt frames; a missing prediction counts as wrong.

    `undefined` is an ordinary seventh class unless `exclude_undefined_gt`
    drops frames whose ground truth carries it.
    """
    if attribute not in ("weather", "scene"):
        raise ValidationError(f"unknown tagging attribute '{attribute}'")
    pred_by_name = preds.by_name()
    correct = 0
    total = 0
    for frame in gts.frames:
        gt_tag = frame.attributes.get(attribute)
        if gt_tag is None:
            raise ValidationError(
                f"frame '{frame.name}': ground truth has no '{attribute}' attribute"
            )
        if exclude_undefined_gt and gt_tag == "undefined":
            continue
        total += 1
        pred_frame = pred_by_name.get(frame.name)
        if pred_frame is not None and pred_frame.attributes.get(attribute) == gt_tag:
            correct += 1
    if total == 0:
        raise EmptySplitError(f"no ground-truth frames with '{attribute}' to score")
    slot = "acc_gw" if attribute == "weather" else "acc_gs"
    return TaskScore(task=slot, value=100.0 * correct / total,
                     breakdown={"correct": correct, "total": total})


class ConfusionMatrix:
    """C x C pixel counts; rows are ground truth, columns predictions."""

    def __init__(self, n_classes: int, counts: np.ndarray | None = None):
        self.n_classes = n_classes
        if counts is None:
            counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        self.counts = counts

    def add(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.n_classes != self.n_classes:
            raise ShapeError("confusion matrices of different class counts")
        return ConfusionMatrix(self.n_classes, self.counts + other.counts)

    def __eq__(self, other):
        return (
            isinstance(other, ConfusionMatrix)
            and self.n_classes == other.n_classes
            and np.array_equal(self.counts, other.counts)
        )


def accumulate_confusion(pred: SemanticMap, gt: SemanticMap, n_classes: int) -> ConfusionMatrix:
    """Counts over pixels whose gt is not the ignore index."""
    if pred.shape != gt.shape:
        raise ShapeError(f"map shape mismatch: {pred.shape} vs {gt.shape}")
    gt_flat = gt.classes.reshape(-1).astype(np.int64)
    pred_flat = pred.classes.reshape(-1).astype(np.int64)
    keep = gt_flat != IGNORE_INDEX
    gt_flat = gt_flat[keep]
    pred_flat = pred_flat[keep]
    if gt_flat.size and (gt_flat.max() >= n_classes or gt_flat.min() < 0):
        raise ValidationError(f"gt class index outside [0, {n_classes})")
    if pred_flat.size and (pred_flat.max() >= n_classes or pred_flat.min() < 0):
        raise ValidationError(f"predicted class index outside [0, {n_classes})")
    flat = gt_flat * n_classes + pred_flat
    counts = np.bincount(flat, minlength=n_classes * n_classes)
    return ConfusionMatrix(n_classes, counts.reshape(n_classes, n_classes))


def miou(cm: ConfusionMatrix, scored_classes=None, task: str = "iou_s") -> TaskScore:
    """Mean IoU over scored classes present in gt or predictions.

    Classes absent from both sides are excluded from the mean rather than
    contributing zero.
    """
    counts = cm.counts
    if scored_classes is None:
        scored_classes = range(cm.n_classes)
    per_class = {}
    values = []
    for c in scored_classes:
        tp = int(counts[c, c])
        fp = int(counts[:, c].sum()) - tp
        fn = int(counts[c, :].sum()) - tp
        if tp + fp + fn == 0:
            continue
        iou = 100.0 * tp / (tp + fp + fn)
        per_class[int(c)] = iou
        values.append(iou)
    if not values:
        raise EmptyMetricError("no scored class present in gt or predictions")
    return TaskScore(task=task, value=float(np.mean(values)), breakdown={"per_class": per_class})


@dataclass
class LaneConfig:
    dilation_radius: int = 5
    thickness: float = 2.0
    subsample: int = 1000
    height: int = 720
    width: int = 1280


# the three label axes of a lane: category, direction, style
_LANE_AXES = (
    ("category", LANE_CATEGORIES, lambda lab: lab.category),
    ("direction", LANE_DIRECTIONS, lambda lab: lab.attributes.get("laneDirection")),
    ("style", LANE_STYLES, lambda lab: lab.attributes.get("laneStyle")),
)


def _lane_rasters(frame: Frame | None, axis_values, key_fn, cfg: LaneConfig):
    """One binary raster per axis value, OR of all matching lane polylines."""
    rasters = {}
    if frame is None:
        return rasters
    for label in frame.labels:
        if label.poly2d is None:
            continue
        value = key_fn(label)
        if value not in axis_values:
            raise ValidationError(
                f"frame '{frame.name}': lane '{label.id}' has invalid axis value {value!r}"
            )
        raster = rasterize_poly2d(label.poly2d, cfg.height, cfg.width, cfg.thickness)
        if value in rasters:
            rasters[value] |= raster
        else:
            rasters[value] = raster
    return rasters


def _lane_frame_counts(gt_frame, pred_frame, cfg: LaneConfig) -> dict:
    """(axis, value) -> (intersection, union, presence) pixel counts."""
    counts: dict[tuple[str, str], tuple[int, int, int]] = {}
    for axis, values, key_fn in _LANE_AXES:
        gt_rasters = _lane_rasters(gt_frame, values, key_fn, cfg)
        pred_rasters = _lane_rasters(pred_frame, values, key_fn, cfg)
        for value in set(gt_rasters) | set(pred_rasters):
            gt_r = gt_rasters.get(value)
            pred_r = pred_rasters.get(value)
            if gt_r is None:
                gt_r = np.zeros((cfg.height, cfg.width), dtype=bool)
            if pred_r is None:
                pred_r = np.zeros((cfg.height, cfg.width), dtype=bool)
            dilated = dilate(gt_r, cfg.dilation_radius)
            counts[(axis, value)] = (
                int(np.count_nonzero(pred_r & dilated)),
                int(np.count_nonzero(pred_r | gt_r)),
                int(np.count_nonzero(gt_r) + np.count_nonzero(pred_r)),
            )
    return counts


def lane_boundary_iou(
    preds: FrameSet, gts: FrameSet, cfg: LaneConfig | None = None, workers: int = 1
) -> TaskScore:
    """Dilated-boundary lane score.

    Per axis and class, intersections are taken against the ground truth
    dilated by `dilation_radius` while unions use the undilated rasters,
    accumulated over the (first `subsample`, sorted by name) frames; the
    per-axis means over present classes are then averaged.
    """
    if cfg is None:
        cfg = LaneConfig()
    if not gts.frames:
        raise EmptySplitError("no ground-truth frames")
    names = sorted(f.name for f in gts.frames)[: cfg.subsample]
    gt_by_name = gts.by_name()
    pred_by_name = preds.by_name()

    per_frame = parallel_map(
        lambda name: _lane_frame_counts(gt_by_name[name], pred_by_name.get(name), cfg),
        names,
        workers=workers,
    )
    inter: dict[tuple[str, str], int] = {}
    union: dict[tuple[str, str], int] = {}
    present: dict[tuple[str, str], int] = {}
    for counts in per_frame:
        for key, (i, u, p) in counts.items():
            inter[key] = inter.get(key, 0) + i
            union[key] = union.get(key, 0) + u
            present[key] = present.get(key, 0) + p

    axis_scores = {}
    for axis, values, _ in _LANE_AXES:
        ious = []
        for value in values:
            key = (axis, value)
            if present.get(key, 0) == 0:
                continue
            denom = union.get(key, 0)
            ious.append(inter.get(key, 0) / denom if denom else 0.0)
        if ious:
            axis_scores[axis] = float(np.mean(ious))
    if not axis_scores:
        raise EmptyMetricError("no lanes present in ground truth or predictions")
    # every lane carries a value on each axis, so all three are populated
    score = 100.0 * float(np.mean([axis_scores[a] for a, _, _ in _LANE_AXES]))
    return TaskScore(task="iou_l", value=score, breakdown={"per_axis": axis_scores})
