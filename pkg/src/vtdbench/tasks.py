"""Task evaluators: load label files, dispatch to metric modules, and
assemble the report document the CLI and bindings both emit."""

from __future__ import annotations

import os
import time

import numpy as np

from . import __version__
from .apeval import APConfig, evaluate_ap, tracking_ap
from .assoc import assa, flow_pair_ious
from .clsseg import (
    ConfusionMatrix,
    LaneConfig,
    accumulate_confusion,
    lane_boundary_iou,
    miou,
    tagging_accuracy,
)
from .errors import EmptyMetricError, FormatError, ValidationError
from .flo import load_flow
from .geometry import DEFAULT_OKS_SIGMAS
from .labels import (
    DRIVABLE_CLASSES,
    IGNORE_INDEX,
    SEMANTIC_CLASSES,
    FrameSet,
    SemanticMap,
    load_label_file,
    validate_frameset,
)
from .pool import parallel_map
from .rle import rle_decode

TASK_IDS = (
    "tagging",
    "tagging_weather",
    "tagging_scene",
    "sem_seg",
    "drivable",
    "lane",
    "det",
    "ins_seg",
    "pose",
    "mot",
    "mot_ap",
    "mot_assa",
    "mots",
    "mots_ap",
    "mots_assa",
    "flow",
)


def _resolve(base_dir: str | None, path: str) -> str:
    if base_dir and not os.path.isabs(path):
        return os.path.join(base_dir, path)
    return path


def load_array(path) -> np.ndarray:
    try:
        return np.load(path, allow_pickle=False)
    except ValueError as exc:
        raise FormatError(f"cannot read array file '{path}': {exc}") from exc


def _load_semantic_map(frame, base_dir, class_names, with_confidence=False) -> SemanticMap:
    """Class map from an .npy reference or rasterized RLE labels."""
    if frame.map_path is not None:
        classes = load_array(_resolve(base_dir, frame.map_path))
        confidence = None
        if with_confidence and frame.confidence_path is not None:
            confidence = load_array(_resolve(base_dir, frame.confidence_path))
        return SemanticMap(classes=classes.astype(np.int64), confidence=confidence)
    shape = None
    for label in frame.labels:
        if label.rle is not None:
            shape = label.rle.size
            break
    if shape is None:
        raise ValidationError(
            f"frame '{frame.name}': no map reference and no RLE labels"
        )
    classes = np.full(shape, IGNORE_INDEX, dtype=np.int64)
    index = {name: i for i, name in enumerate(class_names)}
    for label in frame.labels:
        if label.rle is None:
            continue
        if label.category not in index:
            raise ValidationError(
                f"frame '{frame.name}': category '{label.category}' not in the "
                f"{len(class_names)}-class vocabulary"
            )
        classes[rle_decode(label.rle)] = index[label.category]
    return SemanticMap(classes=classes)


def _segmentation_scores(pred_fs, gt_fs, class_names, scored, slot, workers) -> dict:
    pred_by_name = pred_fs.by_name()

    def one(frame):
        gt_map = _load_semantic_map(frame, gt_fs.base_dir, class_names)
        pred_frame = pred_by_name.get(frame.name)
        if pred_frame is None:
            raise ValidationError(f"no prediction for frame '{frame.name}'")
        pred_map = _load_semantic_map(pred_frame, pred_fs.base_dir, class_names)
        if slot == "iou_a":
            # drivable: background gt pixels are not scored at all
            background = len(DRIVABLE_CLASSES) - 1
            classes = gt_map.classes.copy()
            classes[classes == background] = IGNORE_INDEX
            gt_map = SemanticMap(classes=classes)
        return accumulate_confusion(pred_map, gt_map, len(class_names))

    matrices = parallel_map(one, gt_fs.frames, workers=workers)
    cm = ConfusionMatrix(len(class_names))
    for matrix in matrices:
        cm = cm.add(matrix)
    score = miou(cm, scored_classes=scored, task=slot)
    return {"scores": {slot: score.value}, "breakdown": score.breakdown}


def _collect_masks(frame) -> dict:
    return {
        label.id: label.rle
        for label in frame.labels
        if label.rle is not None and label.rle.area() > 0
    }


def _flow_scores(pred_fs: FrameSet, gt_fs: FrameSet, workers: int) -> dict:
    """Warp frame-t gt masks with the predicted flow of each consecutive
    pair and compare against frame-(t-1) gt masks."""
    flow_by_key = {}
    for frame in pred_fs.frames:
        if frame.flow_path is not None:
            flow_by_key[(frame.video_name, frame.frame_index)] = _resolve(
                pred_fs.base_dir, frame.flow_path
            )
    pairs = []
    for video, frames in sorted(gt_fs.videos().items()):
        ordered = [f for f in frames if f.frame_index is not None]
        for prev, cur in zip(ordered[:-1], ordered[1:]):
            flow_path = flow_by_key.get((video, prev.frame_index))
            if flow_path is None:
                continue
            pairs.append((flow_path, cur, prev))
    if not pairs:
        raise EmptyMetricError("no frame pairs with flow predictions")

    def one(pair):
        flow_path, cur, prev = pair
        flow = load_flow(flow_path)
        return flow_pair_ious(flow, _collect_masks(cur), _collect_masks(prev))

    per_pair = parallel_map(one, pairs, workers=workers)
    ious = [iou for pair_ious in per_pair for iou in pair_ious.values()]
    if not ious:
        raise EmptyMetricError("no paired instances in the split")
    return {
        "scores": {"iou_f": 100.0 * float(np.mean(ious))},
        "breakdown": {"pairs": len(pairs), "instances": len(ious)},
    }


def evaluate_task(task: str, pred_path, gt_path, options: dict | None = None) -> dict:
    """Evaluate one task from prediction/ground-truth files.

    Returns the report document (sans duration); see the CLI for the
    on-disk envelope.
    """
    options = dict(options or {})
    workers = int(options.pop("workers", 1))
    if task not in TASK_IDS:
        raise ValidationError(f"unknown task '{task}', expected one of {list(TASK_IDS)}")

    parse_task = {
        "tagging": None,
        "tagging_weather": None,
        "tagging_scene": None,
        "sem_seg": None,
        "drivable": None,
        "lane": "lane",
        "det": "det",
        "ins_seg": "ins_seg",
        "pose": "pose",
        "mot": "mot",
        "mot_ap": "mot",
        "mot_assa": "mot",
        "mots": "mots",
        "mots_ap": "mots",
        "mots_assa": "mots",
        "flow": None,
    }[task]
    gt_fs = load_label_file(gt_path, task=parse_task)
    pred_fs = load_label_file(pred_path, task=parse_task if task != "flow" else None)

    if task in ("tagging", "tagging_weather", "tagging_scene"):
        exclude = bool(options.pop("exclude_undefined", False))
        _reject_unknown_options(task, options)
        attributes = {
            "tagging": ("weather", "scene"),
            "tagging_weather": ("weather",),
            "tagging_scene": ("scene",),
        }[task]
        scores = {}
        breakdown = {}
        for attribute in attributes:
            ts = tagging_accuracy(pred_fs, gt_fs, attribute, exclude_undefined_gt=exclude)
            scores[ts.task] = ts.value
            breakdown[ts.task] = ts.breakdown
        return {"scores": scores, "breakdown": breakdown}

    if task == "sem_seg":
        _reject_unknown_options(task, options)
        return _segmentation_scores(
            pred_fs, gt_fs, SEMANTIC_CLASSES, range(len(SEMANTIC_CLASSES)), "iou_s", workers
        )

    if task == "drivable":
        _reject_unknown_options(task, options)
        return _segmentation_scores(
            pred_fs, gt_fs, DRIVABLE_CLASSES, (0, 1), "iou_a", workers
        )

    if task == "lane":
        cfg = LaneConfig(
            dilation_radius=int(options.pop("dilation_radius", 5)),
            thickness=float(options.pop("thickness", 2.0)),
            subsample=int(options.pop("subsample", 1000)),
            height=int(options.pop("height", 720)),
            width=int(options.pop("width", 1280)),
        )
        _reject_unknown_options(task, options)
        ts = lane_boundary_iou(pred_fs, gt_fs, cfg, workers=workers)
        return {"scores": {"iou_l": ts.value}, "breakdown": ts.breakdown}

    if task in ("det", "ins_seg", "pose"):
        mode = {"det": "box", "ins_seg": "mask", "pose": "keypoint"}[task]
        slot = {"det": "ap_d", "ins_seg": "ap_i", "pose": "ap_p"}[task]
        cfg = _ap_config(mode, options)
        _reject_unknown_options(task, options)
        report = evaluate_ap(pred_fs, gt_fs, cfg, workers=workers)
        return {"scores": {slot: report.mean_ap}, "breakdown": report.to_dict()}

    if task in ("mot", "mot_ap", "mot_assa", "mots", "mots_ap", "mots_assa"):
        mode = "mask" if task.startswith("mots") else "box"
        ap_slot = "ap_r" if mode == "mask" else "ap_t"
        assa_slot = "assa_r" if mode == "mask" else "assa_t"
        want_ap = not task.endswith("_assa")
        want_assa = not task.endswith("_ap")
        cfg = _ap_config(mode, options) if want_ap else None
        _reject_unknown_options(task, options)
        scores = {}
        breakdown = {}
        if want_ap:
            report = tracking_ap(pred_fs, gt_fs, cfg, workers=workers)
            scores[ap_slot] = report.mean_ap
            breakdown["ap"] = report.to_dict()
        if want_assa:
            ts = assa(pred_fs, gt_fs, mode=mode, workers=workers)
            scores[assa_slot] = ts.value
            breakdown["assa"] = ts.breakdown
        return {"scores": scores, "breakdown": breakdown}

    _reject_unknown_options(task, options)
    return _flow_scores(pred_fs, gt_fs, workers)


def _ap_config(mode: str, options: dict) -> APConfig:
    sigmas = options.pop("sigmas", None)
    if sigmas is None:
        sigmas = DEFAULT_OKS_SIGMAS
    else:
        sigmas = tuple(float(s) for s in sigmas)
    return APConfig(
        mode=mode,
        max_dets=int(options.pop("max_dets", 100)),
        oks_sigmas=sigmas,
    )


def _reject_unknown_options(task: str, options: dict) -> None:
    if options:
        raise ValidationError(f"unknown options for task '{task}': {sorted(options)}")


def build_report(task: str, result: dict, config: dict, duration: float) -> dict:
    return {
        "version": __version__,
        "task": task,
        "scores": result["scores"],
        "breakdown": result.get("breakdown", {}),
        "config": config,
        "duration_seconds": duration,
    }


def run_evaluation(task: str, pred_path, gt_path, options: dict | None = None) -> dict:
    """Full report with config echo and wall-clock duration.

    The worker count is an execution knob and stays out of the echo, so
    reports are independent of it.
    """
    started = time.monotonic()
    result = evaluate_task(task, pred_path, gt_path, options)
    duration = time.monotonic() - started
    config = {"task": task, "pred": str(pred_path), "gt": str(gt_path)}
    config.update(
        {k: _jsonable(v) for k, v in (options or {}).items() if k != "workers"}
    )
    return build_report(task, result, config, duration)


def run_aggregation(scores: dict, scales=None, partial: bool = False) -> dict:
    """VTDA report from a slot -> value mapping."""
    from .vtda import vtda

    started = time.monotonic()
    groups = vtda(scores, scales, partial=partial)
    duration = time.monotonic() - started
    result = {
        "scores": groups.to_dict(),
        "breakdown": {"slots": dict(sorted(scores.items()))},
    }
    return build_report("vtda", result, {"task": "vtda", "partial": partial}, duration)


def _jsonable(value):
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return str(value)


def validate_file(task: str, path) -> list[str]:
    """Diagnostics for `validate`; empty list means the file passes."""
    diagnostics: list[str] = []
    parse_task = task if task in (
        "lane", "det", "ins_seg", "pose", "mot", "mots"
    ) else None
    try:
        fs = load_label_file(path, task=None)
    except (ValidationError, FormatError) as exc:
        return [str(exc)]
    if parse_task is not None:
        try:
            validate_frameset(fs, parse_task)
        except ValidationError as exc:
            diagnostics.append(str(exc))
    return diagnostics
