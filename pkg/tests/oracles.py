"""Independent brute-force oracles.

These re-derive the metrics from their definitions on plain dicts and
lists: exhaustive matching enumeration instead of the Hungarian solver,
explicit greedy loops and PR curves instead of the vectorized engine.
Similarity formulas mirror the documented kernel expressions so float
comparisons stay bit-exact.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


# ---------------------------------------------------------------- kernels


def box_iou_oracle(a, b) -> float:
    ax1, ay1, ax2, ay2 = a
    bx1, by1, bx2, by2 = b
    ix = min(ax2, bx2) - max(ax1, bx1)
    iy = min(ay2, by2) - max(ay1, by1)
    if ix <= 0 or iy <= 0:
        inter = 0.0
    else:
        inter = ix * iy
    area_a = (ax2 - ax1) * (ay2 - ay1)
    area_b = (bx2 - bx1) * (by2 - by1)
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return inter / union


def mask_iou_oracle(a: np.ndarray, b: np.ndarray) -> float:
    inter = int(np.count_nonzero(a & b))
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 0.0
    return inter / union


def oks_oracle(pred_joints, gt_joints, gt_area, sigmas) -> float:
    visible = [i for i, (_, _, s) in enumerate(gt_joints) if s > 0.0]
    total = 0.0
    for i in visible:
        px, py, _ = pred_joints[i]
        gx, gy, _ = gt_joints[i]
        d2 = (px - gx) ** 2 + (py - gy) ** 2
        k = 2.0 * sigmas[i]
        total += math.exp(-d2 / (2.0 * gt_area * k * k))
    return total / len(visible)


# ----------------------------------------------------------- assignment


def enumerate_matchings(n_rows: int, n_cols: int, eligible) -> list:
    """All matchings over eligible pairs, as sorted (row, col) tuples."""
    options = []
    for r in range(n_rows):
        cols = [c for c in range(n_cols) if eligible[r][c]]
        options.append([None] + cols)
    out = []
    for combo in itertools.product(*options):
        used = [c for c in combo if c is not None]
        if len(used) != len(set(used)):
            continue
        out.append(tuple((r, c) for r, c in enumerate(combo) if c is not None))
    return out


def assignment_oracle(costs, eligible=None):
    """Max-cardinality, then min exact cost, then lexicographically
    smallest pair list."""
    costs = np.asarray(costs, dtype=float)
    n_rows, n_cols = costs.shape if costs.size else (costs.shape[0], 0)
    if eligible is None:
        eligible = [[True] * n_cols for _ in range(n_rows)]
    candidates = enumerate_matchings(n_rows, n_cols, eligible)
    best = None
    best_key = None
    for pairs in candidates:
        cost = sum((Fraction(float(costs[r, c])) for r, c in pairs), Fraction(0))
        key = (-len(pairs), cost, pairs)
        if best_key is None or key < best_key:
            best_key = key
            best = pairs
    return best


# ----------------------------------------------------------------- AP


def ap_oracle(frames, mode, thresholds, max_dets=100, sigmas=None):
    """First-principles AP per (category, threshold).

    `frames` is a list of {"name", "gts": [...], "preds": [...]} where each
    gt/pred is {"id", "category", "geom"} plus "score" for preds and
    "area" for keypoint gts. Returns {category: [ap per threshold]} plus
    the mean AP, mirroring the engine's aggregation.
    """

    def similarity(pred_geom, gt):
        if mode == "box":
            return box_iou_oracle(pred_geom, gt["geom"])
        if mode == "mask":
            return mask_iou_oracle(pred_geom, gt["geom"])
        return oks_oracle(pred_geom, gt["geom"], gt["area"], sigmas)

    categories = sorted(
        {g["category"] for f in frames for g in f["gts"] if _scorable(g, mode)}
    )
    per_class = {}
    for category in categories:
        gts_by_frame = {}
        for f in frames:
            items = [g for g in f["gts"] if g["category"] == category and _scorable(g, mode)]
            items.sort(key=lambda g: g["id"])
            if items:
                gts_by_frame[f["name"]] = items
        npos = sum(len(v) for v in gts_by_frame.values())
        dets = []
        for f in frames:
            preds = [p for p in f["preds"] if p["category"] == category]
            preds.sort(key=lambda p: (-p["score"], p["id"]))
            for p in preds[:max_dets]:
                dets.append((p["score"], f["name"], p["id"], p["geom"]))
        dets.sort(key=lambda d: (-d[0], d[1], d[2]))

        aps = []
        for threshold in thresholds:
            taken = set()
            flags = []
            for score, frame_name, det_id, geom in dets:
                best = None
                best_sim = None
                for gi, gt in enumerate(gts_by_frame.get(frame_name, [])):
                    if (frame_name, gi) in taken:
                        continue
                    sim = similarity(geom, gt)
                    if sim < threshold:
                        continue
                    if best_sim is None or sim > best_sim:
                        best_sim = sim
                        best = gi
                if best is not None:
                    taken.add((frame_name, best))
                    flags.append(True)
                else:
                    flags.append(False)
            precisions = []
            recalls = []
            tp = 0
            for rank, flag in enumerate(flags, start=1):
                tp += int(flag)
                precisions.append(tp / rank)
                recalls.append(tp / npos)
            total = 0.0
            for i in range(101):
                point = i / 100.0
                candidates = [p for p, r in zip(precisions, recalls) if r >= point]
                if candidates:
                    total += max(candidates)
            aps.append(100.0 * (total / 101))
        per_class[category] = aps
    mean_ap = float(np.mean([float(np.mean(per_class[c])) for c in categories]))
    return per_class, mean_ap


def _scorable(gt, mode) -> bool:
    if mode != "keypoint":
        return True
    return any(s > 0.0 for _, _, s in gt["geom"])


# --------------------------------------------------------------- AssA


def assa_oracle(pred_tracks, gt_tracks, mode, alphas):
    """Direct application of the association-accuracy definition.

    Track sets are {video: {tid: {"category": str, "frames": {fi: geom}}}}.
    Returns (per_category, final_score).
    """

    def similarity(a, b):
        if mode == "mask":
            return mask_iou_oracle(a, b)
        return box_iou_oracle(a, b)

    categories = sorted(
        {t["category"] for tracks in gt_tracks.values() for t in tracks.values()}
    )
    per_category = {}
    for category in categories:
        match_counts = [dict() for _ in alphas]
        pred_counts = {}
        gt_counts = {}
        for video in sorted(gt_tracks):
            gts = {
                tid: t
                for tid, t in gt_tracks[video].items()
                if t["category"] == category
            }
            preds = {
                tid: t
                for tid, t in pred_tracks.get(video, {}).items()
                if t["category"] == category
            }
            for tid, t in preds.items():
                pred_counts[(video, tid)] = len(t["frames"])
            for tid, t in gts.items():
                gt_counts[(video, tid)] = len(t["frames"])
            all_fis = sorted(
                {fi for t in gts.values() for fi in t["frames"]}
                | {fi for t in preds.values() for fi in t["frames"]}
            )
            for fi in all_fis:
                rows = sorted(tid for tid, t in preds.items() if fi in t["frames"])
                cols = sorted(tid for tid, t in gts.items() if fi in t["frames"])
                if not rows or not cols:
                    continue
                sims = [
                    [
                        similarity(preds[r]["frames"][fi], gts[c]["frames"][fi])
                        for c in cols
                    ]
                    for r in rows
                ]
                for ai, alpha in enumerate(alphas):
                    eligible = [
                        [sims[ri][ci] >= alpha for ci in range(len(cols))]
                        for ri in range(len(rows))
                    ]
                    if not any(any(row) for row in eligible):
                        continue
                    best = None
                    best_key = None
                    for pairs in enumerate_matchings(len(rows), len(cols), eligible):
                        cost = sum(
                            (Fraction(1.0 - sims[r][c]) for r, c in pairs), Fraction(0)
                        )
                        key = (-len(pairs), cost, pairs)
                        if best_key is None or key < best_key:
                            best_key = key
                            best = pairs
                    for r, c in best:
                        pair_key = (video, rows[r], cols[c])
                        match_counts[ai][pair_key] = match_counts[ai].get(pair_key, 0) + 1

        alpha_scores = []
        for ai in range(len(alphas)):
            total_tp = 0
            acc = 0.0
            for (video, i, j), n in sorted(match_counts[ai].items()):
                denom = pred_counts[(video, i)] + gt_counts[(video, j)] - n
                acc += n * (n / denom)
                total_tp += n
            alpha_scores.append(acc / total_tp if total_tp else 0.0)
        per_category[category] = float(np.mean(alpha_scores))
    final = 100.0 * float(np.mean([per_category[c] for c in categories]))
    return per_category, final


# --------------------------------------------------------------- warping


def warp_oracle(mask_t: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Pixel-by-pixel nearest-sample warp, rounding half away from zero."""

    def round_half_away(x: float) -> int:
        if x >= 0:
            return int(math.floor(x + 0.5))
        return int(math.ceil(x - 0.5))

    height, width = mask_t.shape
    out = np.zeros_like(mask_t, dtype=bool)
    for y in range(height):
        for x in range(width):
            sx = x + round_half_away(float(u[y, x]))
            sy = y + round_half_away(float(v[y, x]))
            if 0 <= sx < width and 0 <= sy < height:
                out[y, x] = bool(mask_t[sy, sx])
    return out
