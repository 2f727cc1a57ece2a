"""Association metrics: HOTA association accuracy and the flow proxy score."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clsseg import TaskScore
from .errors import EmptyMetricError, ShapeError, ValidationError
from .flo import FlowField
from .geometry import box_iou, mask_iou, solve_assignment
from .labels import FrameSet
from .pool import parallel_map
from .rle import RleMask, rle_decode

DEFAULT_ALPHAS = tuple(round(0.05 * i, 2) for i in range(1, 20))


@dataclass
class Track:
    category: str
    geoms: dict = field(default_factory=dict)  # frame_index -> Box2D | RleMask


def build_trackset(fs: FrameSet, mode: str) -> dict:
    """Per video: track id -> Track with time-indexed geometry."""
    videos: dict[str, dict[str, Track]] = {}
    for frame in fs.frames:
        if frame.video_name is None or frame.frame_index is None:
            raise ValidationError(
                f"frame '{frame.name}': tracking frames need videoName and frameIndex"
            )
        tracks = videos.setdefault(frame.video_name, {})
        for label in frame.labels:
            geom = label.rle if mode == "mask" else label.box2d
            if geom is None:
                raise ValidationError(
                    f"frame '{frame.name}': track '{label.id}' has no "
                    f"{'mask' if mode == 'mask' else 'box'} geometry"
                )
            track = tracks.get(label.id)
            if track is None:
                track = Track(category=label.category)
                tracks[label.id] = track
            elif track.category != label.category:
                raise ValidationError(
                    f"video '{frame.video_name}': track '{label.id}' changes category "
                    f"from '{track.category}' to '{label.category}'"
                )
            if frame.frame_index in track.geoms:
                raise ValidationError(
                    f"video '{frame.video_name}': duplicate entry for track "
                    f"'{label.id}' at frameIndex {frame.frame_index}"
                )
            track.geoms[frame.frame_index] = geom
    return videos


def _pair_similarity(pred_geom, gt_geom, mode: str) -> float:
    if mode == "mask":
        return mask_iou(pred_geom, gt_geom)
    return box_iou(pred_geom, gt_geom)


def assa(
    preds: FrameSet,
    gts: FrameSet,
    mode: str = "box",
    alphas: tuple[float, ...] = DEFAULT_ALPHAS,
    workers: int = 1,
) -> TaskScore:
    """Association accuracy, averaged over alpha then over categories.

    Per frame and alpha, predictions are matched to ground truth among
    pairs with similarity >= alpha, minimizing sum(1 - S) at maximal
    cardinality. Each per-frame true-positive match c = (pred i, gt j)
    scores TPA / (TPA + FNA + FPA) and the alpha value is the mean over
    all true-positive matches; no matches means zero.
    """
    if mode not in ("box", "mask"):
        raise ValidationError(f"unknown association mode '{mode}'")
    pred_videos = build_trackset(preds, mode)
    gt_videos = build_trackset(gts, mode)
    missing = sorted(set(pred_videos) - set(gt_videos))
    if missing:
        raise ValidationError(f"videos present in predictions but not gt: {missing}")

    categories = sorted(
        {t.category for tracks in gt_videos.values() for t in tracks.values()}
    )
    if not categories:
        raise EmptyMetricError("no ground-truth tracks")

    values = parallel_map(
        lambda category: _assa_category(
            category, pred_videos, gt_videos, mode, alphas
        ),
        categories,
        workers=workers,
    )
    per_category = dict(zip(categories, values))
    value = 100.0 * float(np.mean([per_category[c] for c in categories]))
    return TaskScore(task="assa", value=value, breakdown={"per_category": per_category})


def _assa_category(category, pred_videos, gt_videos, mode, alphas) -> float:
    # per-(video, track) frame counts and per-alpha pair-match counts
    pred_counts: dict[tuple[str, str], int] = {}
    gt_counts: dict[tuple[str, str], int] = {}
    match_counts = [dict() for _ in alphas]  # (video, i, j) -> frames matched
    for video in sorted(gt_videos):
        gt_tracks = {
            tid: t for tid, t in gt_videos[video].items() if t.category == category
        }
        pred_tracks = {
            tid: t
            for tid, t in pred_videos.get(video, {}).items()
            if t.category == category
        }
        for tid, track in pred_tracks.items():
            pred_counts[(video, tid)] = len(track.geoms)
        for tid, track in gt_tracks.items():
            gt_counts[(video, tid)] = len(track.geoms)
        frame_indices = sorted(
            {fi for t in gt_tracks.values() for fi in t.geoms}
            | {fi for t in pred_tracks.values() for fi in t.geoms}
        )
        pred_ids = sorted(pred_tracks)
        gt_ids = sorted(gt_tracks)
        for fi in frame_indices:
            rows = [tid for tid in pred_ids if fi in pred_tracks[tid].geoms]
            cols = [tid for tid in gt_ids if fi in gt_tracks[tid].geoms]
            if not rows or not cols:
                continue
            sim = np.array(
                [
                    [
                        _pair_similarity(
                            pred_tracks[r].geoms[fi], gt_tracks[c].geoms[fi], mode
                        )
                        for c in cols
                    ]
                    for r in rows
                ]
            )
            for ai, alpha in enumerate(alphas):
                eligible = sim >= alpha
                if not eligible.any():
                    continue
                matching = solve_assignment(1.0 - sim, eligible=eligible)
                counts = match_counts[ai]
                for r, c in matching.pairs:
                    key = (video, rows[r], cols[c])
                    counts[key] = counts.get(key, 0) + 1

    alpha_scores = []
    for ai in range(len(alphas)):
        counts = match_counts[ai]
        total_tp = 0
        acc = 0.0
        # sorted accumulation keeps the float sum reproducible
        for (video, i, j), n_matched in sorted(counts.items()):
            denom = pred_counts[(video, i)] + gt_counts[(video, j)] - n_matched
            acc += n_matched * (n_matched / denom)
            total_tp += n_matched
        alpha_scores.append(acc / total_tp if total_tp else 0.0)
    return float(np.mean(alpha_scores))


def _round_half_away(values: np.ndarray) -> np.ndarray:
    return np.where(
        values >= 0, np.floor(values + 0.5), np.ceil(values - 0.5)
    ).astype(np.int64)


def warp_mask(mask_t: np.ndarray, flow: FlowField) -> np.ndarray:
    """Synthesize the previous frame's mask: out(p) = mask_t(p + V(p)).

    Nearest sampling rounds half away from zero; reads outside the raster
    are background.
    """
    height, width = mask_t.shape
    if (flow.height, flow.width) != (height, width):
        raise ShapeError(
            f"flow {flow.height}x{flow.width} vs mask {height}x{width}"
        )
    ys, xs = np.mgrid[0:height, 0:width]
    sample_x = xs + _round_half_away(flow.u)
    sample_y = ys + _round_half_away(flow.v)
    valid = (
        (sample_x >= 0) & (sample_x < width) & (sample_y >= 0) & (sample_y < height)
    )
    out = np.zeros((height, width), dtype=bool)
    out[valid] = mask_t[sample_y[valid], sample_x[valid]]
    return out


def flow_pair_ious(
    flow: FlowField,
    masks_t: dict[str, RleMask],
    masks_prev: dict[str, RleMask],
) -> dict[str, float]:
    """IoU of the warped frame-t mask against the frame-(t-1) mask for
    every instance id present (non-empty) on both sides."""
    ious = {}
    for tid in sorted(set(masks_t) & set(masks_prev)):
        mask_t = masks_t[tid]
        mask_prev = masks_prev[tid]
        if mask_t.area() == 0 or mask_prev.area() == 0:
            continue
        warped = warp_mask(rle_decode(mask_t), flow)
        prev = rle_decode(mask_prev)
        inter = int(np.count_nonzero(warped & prev))
        union = int(np.count_nonzero(warped | prev))
        ious[tid] = inter / union if union else 0.0
    return ious


def flow_proxy_iou(
    flow: FlowField,
    masks_t: dict[str, RleMask],
    masks_prev: dict[str, RleMask],
) -> TaskScore:
    ious = flow_pair_ious(flow, masks_t, masks_prev)
    if not ious:
        raise EmptyMetricError("no paired instances between the two frames")
    return TaskScore(
        task="iou_f",
        value=100.0 * float(np.mean(list(ious.values()))),
        breakdown={"per_instance": ious},
    )
