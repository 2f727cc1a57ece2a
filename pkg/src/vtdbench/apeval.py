"""Average-precision engine in box, mask and keypoint modes.

Matching follows the COCO convention: per class and IoU threshold,
predictions in descending score order greedily claim the unmatched
ground truth of highest similarity within their frame. AP is the mean of
interpolated precision at 101 recall points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMetricError, EmptySplitError, ValidationError
from .geometry import DEFAULT_OKS_SIGMAS, box_iou, mask_iou, oks
from .labels import FrameSet, Label
from .pool import parallel_map

DEFAULT_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
RECALL_POINTS = tuple(i / 100.0 for i in range(101))

MODES = ("box", "mask", "keypoint")


@dataclass
class APConfig:
    mode: str = "box"
    iou_thresholds: tuple[float, ...] = DEFAULT_IOU_THRESHOLDS
    max_dets: int = 100
    oks_sigmas: tuple[float, ...] = DEFAULT_OKS_SIGMAS

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"unknown AP mode '{self.mode}'")


@dataclass
class APReport:
    mode: str
    thresholds: tuple[float, ...]
    per_class_threshold: dict = field(default_factory=dict)  # class -> [AP per threshold]
    per_class: dict = field(default_factory=dict)  # class -> mean AP over thresholds
    mean_ap: float = 0.0
    max_recall: dict = field(default_factory=dict)  # class -> [best recall per threshold]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "thresholds": list(self.thresholds),
            "per_class_threshold": {
                k: list(v) for k, v in sorted(self.per_class_threshold.items())
            },
            "per_class": dict(sorted(self.per_class.items())),
            "mean_ap": self.mean_ap,
            "max_recall": {k: list(v) for k, v in sorted(self.max_recall.items())},
        }


def _geometry(label: Label, mode: str, frame_name: str):
    if mode == "box":
        if label.box2d is None:
            raise ValidationError(f"frame '{frame_name}': label '{label.id}' has no box2d")
        return label.box2d
    if mode == "mask":
        if label.rle is None:
            raise ValidationError(f"frame '{frame_name}': label '{label.id}' has no rle mask")
        return label.rle
    if label.graph is None:
        raise ValidationError(f"frame '{frame_name}': label '{label.id}' has no keypoints")
    return label.graph


def _similarity(pred_geom, gt_label: Label, mode: str, cfg: APConfig, frame_name: str) -> float:
    if mode == "box":
        return box_iou(pred_geom, gt_label.box2d)
    if mode == "mask":
        return mask_iou(pred_geom, gt_label.rle)
    if gt_label.box2d is None:
        raise ValidationError(
            f"frame '{frame_name}': keypoint gt '{gt_label.id}' needs a box for OKS area"
        )
    return oks(pred_geom, gt_label.graph, gt_label.box2d.area, cfg.oks_sigmas)


def evaluate_ap(
    preds: FrameSet, gts: FrameSet, cfg: APConfig | None = None, workers: int = 1
) -> APReport:
    if cfg is None:
        cfg = APConfig()
    if not gts.frames:
        raise EmptySplitError("no ground-truth frames")
    mode = cfg.mode

    # per class: gts[frame] in id order, preds globally in score order
    gt_by_class: dict[str, dict[str, list[Label]]] = {}
    for frame in gts.frames:
        for label in sorted(frame.labels, key=lambda l: l.id):
            if mode == "keypoint":
                if label.graph is None:
                    continue
                if not label.graph.visible():
                    continue  # unscorable gt: no visible joints
                if label.box2d is None or label.box2d.area <= 0:
                    raise ValidationError(
                        f"frame '{frame.name}': keypoint gt '{label.id}' needs a "
                        f"positive-area box for OKS normalization"
                    )
            gt_by_class.setdefault(label.category, {}).setdefault(frame.name, []).append(label)

    pred_by_class: dict[str, list[tuple[float, str, str, object]]] = {}
    for frame in preds.frames:
        per_class_frame: dict[str, list[Label]] = {}
        for label in frame.labels:
            if label.score is None:
                raise ValidationError(
                    f"frame '{frame.name}': prediction '{label.id}' has no score"
                )
            per_class_frame.setdefault(label.category, []).append(label)
        for category, labels in per_class_frame.items():
            labels.sort(key=lambda l: (-l.score, l.id))
            for label in labels[: cfg.max_dets]:
                pred_by_class.setdefault(category, []).append(
                    (label.score, frame.name, label.id, _geometry(label, mode, frame.name))
                )

    classes = sorted(gt_by_class)
    if not classes:
        raise EmptyMetricError("no ground-truth instances to score")

    report = APReport(mode=mode, thresholds=tuple(cfg.iou_thresholds))
    results = parallel_map(
        lambda category: _eval_class(
            gt_by_class[category], pred_by_class.get(category, []), mode, cfg
        ),
        classes,
        workers=workers,
    )
    for category, (aps, recalls) in zip(classes, results):
        report.per_class_threshold[category] = aps
        report.per_class[category] = float(np.mean(aps))
        report.max_recall[category] = recalls
    report.mean_ap = float(np.mean([report.per_class[c] for c in classes]))
    return report


def _eval_class(gt_frames, dets, mode, cfg):
    npos = sum(len(v) for v in gt_frames.values())
    dets = sorted(dets, key=lambda d: (-d[0], d[1], d[2]))
    # similarity of each detection to each gt in its frame, reused per threshold
    sims = []
    for _, frame_name, _, geom in dets:
        sims.append(
            [
                _similarity(geom, gt, mode, cfg, frame_name)
                for gt in gt_frames.get(frame_name, [])
            ]
        )
    aps = []
    recalls = []
    for threshold in cfg.iou_thresholds:
        matched: dict[str, set[int]] = {}
        flags = np.zeros(len(dets), dtype=bool)
        for di, (_, frame_name, _, _) in enumerate(dets):
            best = -1
            best_sim = 0.0
            taken = matched.setdefault(frame_name, set())
            for gi, sim in enumerate(sims[di]):
                if gi in taken or sim < threshold:
                    continue
                if sim > best_sim or best < 0:
                    best_sim = sim
                    best = gi
            if best >= 0 and best_sim >= threshold:
                taken.add(best)
                flags[di] = True
        tp = np.cumsum(flags)
        ranks = np.arange(1, len(dets) + 1)
        recall = tp / npos
        precision = tp / ranks
        aps.append(100.0 * _interpolated_ap(recall, precision))
        recalls.append(float(recall[-1]) if len(dets) else 0.0)
    return aps, recalls


def _interpolated_ap(recall: np.ndarray, precision: np.ndarray) -> float:
    """Mean over 101 recall points of max precision at recall >= point."""
    if len(recall) == 0:
        return 0.0
    total = 0.0
    for point in RECALL_POINTS:
        mask = recall >= point
        if mask.any():
            total += float(precision[mask].max())
    return total / len(RECALL_POINTS)


def tracking_ap(
    preds: FrameSet, gts: FrameSet, cfg: APConfig | None = None, workers: int = 1
) -> APReport:
    """Frame-wise AP over a tracking split; track ids are ignored."""
    return evaluate_ap(preds, gts, cfg, workers=workers)
