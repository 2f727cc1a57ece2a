"""Shared builders: random micro-datasets emitted both as package
FrameSets and as the plain structures the oracles consume."""

from __future__ import annotations

import numpy as np
import pytest

from vtdbench.labels import Box2D, Frame, FrameSet, Keypoints, Label
from vtdbench.rle import rle_encode

CATEGORIES = ("car", "pedestrian", "bus")


def random_box(rng, size=100.0):
    x1 = rng.uniform(0, size * 0.8)
    y1 = rng.uniform(0, size * 0.8)
    w = rng.uniform(1.0, size * 0.3)
    h = rng.uniform(1.0, size * 0.3)
    return (x1, y1, x1 + w, y1 + h)


def jitter_box(rng, box, scale=0.3):
    x1, y1, x2, y2 = box
    w = x2 - x1
    h = y2 - y1
    dx = rng.uniform(-scale, scale) * w
    dy = rng.uniform(-scale, scale) * h
    return (x1 + dx, y1 + dy, x2 + dx, y2 + dy)


def random_mask(rng, height=12, width=12):
    # blocky masks so overlaps at various IoU levels are common
    mask = np.zeros((height, width), dtype=bool)
    for _ in range(rng.integers(1, 3)):
        y = rng.integers(0, height - 2)
        x = rng.integers(0, width - 2)
        hh = rng.integers(2, max(3, height // 2))
        ww = rng.integers(2, max(3, width // 2))
        mask[y : y + hh, x : x + ww] = True
    return mask


def random_keypoints(rng, n_joints=18, span=50.0):
    joints = []
    for _ in range(n_joints):
        visible = rng.random() > 0.3
        joints.append(
            (float(rng.uniform(0, span)), float(rng.uniform(0, span)),
             float(rng.uniform(0.2, 1.0)) if visible else 0.0)
        )
    return tuple(joints)


def jitter_keypoints(rng, joints, sigma=3.0):
    out = []
    for x, y, _ in joints:
        out.append(
            (x + float(rng.normal(0, sigma)), y + float(rng.normal(0, sigma)),
             float(rng.uniform(0.3, 1.0)))
        )
    return tuple(out)


def _label_from_plain(item, mode, scored):
    kwargs = {"id": item["id"], "category": item["category"]}
    if scored:
        kwargs["score"] = item["score"]
    if mode == "box":
        kwargs["box2d"] = Box2D(*item["geom"])
    elif mode == "mask":
        kwargs["rle"] = rle_encode(item["geom"])
    else:
        kwargs["graph"] = Keypoints(joints=item["geom"])
        if "area_side" in item:
            # a square box whose area is bit-identical to item["area"]
            kwargs["box2d"] = Box2D(0.0, 0.0, item["area_side"], item["area_side"])
    return Label(**kwargs)


def make_ap_dataset(seed, mode="box", max_frames=5, max_objects=10):
    """Random micro-dataset for AP: (pred FrameSet, gt FrameSet, oracle frames)."""
    rng = np.random.default_rng(seed)
    frames = []
    n_frames = int(rng.integers(1, max_frames + 1))
    for fi in range(n_frames):
        name = f"img{fi:03d}"
        gts = []
        n_gt = int(rng.integers(1, max_objects + 1))
        for gi in range(n_gt):
            category = CATEGORIES[int(rng.integers(0, len(CATEGORIES)))]
            if mode == "box":
                geom = random_box(rng)
                gt = {"id": f"g{gi}", "category": category, "geom": geom}
            elif mode == "mask":
                geom = random_mask(rng)
                gt = {"id": f"g{gi}", "category": category, "geom": geom}
            else:
                geom = random_keypoints(rng)
                side = float(rng.uniform(10.0, 50.0))
                gt = {
                    "id": f"g{gi}",
                    "category": category,
                    "geom": geom,
                    "area_side": side,
                    "area": side * side,
                }
            gts.append(gt)
        preds = []
        pi = 0
        for gt in gts:
            # detections near some gts, plus occasional duplicates
            for _ in range(int(rng.integers(0, 3))):
                if mode == "box":
                    geom = jitter_box(rng, gt["geom"])
                elif mode == "mask":
                    geom = random_mask(rng) if rng.random() < 0.3 else gt["geom"].copy()
                else:
                    geom = jitter_keypoints(rng, gt["geom"])
                preds.append(
                    {
                        "id": f"p{pi}",
                        "category": gt["category"],
                        "score": float(np.round(rng.uniform(0.05, 1.0), 3)),
                        "geom": geom,
                    }
                )
                pi += 1
        for _ in range(int(rng.integers(0, 4))):  # false positives
            category = CATEGORIES[int(rng.integers(0, len(CATEGORIES)))]
            if mode == "box":
                geom = random_box(rng)
            elif mode == "mask":
                geom = random_mask(rng)
            else:
                geom = random_keypoints(rng)
            preds.append(
                {
                    "id": f"p{pi}",
                    "category": category,
                    "score": float(np.round(rng.uniform(0.05, 1.0), 3)),
                    "geom": geom,
                }
            )
            pi += 1
        frames.append({"name": name, "gts": gts, "preds": preds})

    gt_fs = FrameSet(
        frames=[
            Frame(
                name=f["name"],
                labels=[_label_from_plain(g, mode, scored=False) for g in f["gts"]],
            )
            for f in frames
        ]
    )
    pred_fs = FrameSet(
        frames=[
            Frame(
                name=f["name"],
                labels=[_label_from_plain(p, mode, scored=True) for p in f["preds"]],
            )
            for f in frames
        ]
    )
    return pred_fs, gt_fs, frames


def make_track_dataset(seed, mode="box", max_tracks=3, max_frames=6):
    """Random micro-sequence: (pred FrameSet, gt FrameSet, oracle tracks)."""
    rng = np.random.default_rng(seed)
    video = "vid0"
    n_frames = int(rng.integers(2, max_frames + 1))
    categories = CATEGORIES[: int(rng.integers(1, 3))]

    def random_tracks(prefix, n):
        tracks = {}
        for ti in range(n):
            category = categories[int(rng.integers(0, len(categories)))]
            start = int(rng.integers(0, n_frames - 1))
            end = int(rng.integers(start + 1, n_frames + 1))
            base = random_box(rng) if mode == "box" else None
            geoms = {}
            for fi in range(start, end):
                if mode == "box":
                    geoms[fi] = jitter_box(rng, base, scale=0.15)
                else:
                    geoms[fi] = random_mask(rng)
            tracks[f"{prefix}{ti}"] = {"category": category, "frames": geoms}
        return tracks

    gt_tracks = {video: random_tracks("g", int(rng.integers(1, max_tracks + 1)))}
    pred_tracks = {video: random_tracks("p", int(rng.integers(0, max_tracks + 1)))}
    return (
        trackset_to_frameset(pred_tracks, mode, scored=False),
        trackset_to_frameset(gt_tracks, mode, scored=False),
        pred_tracks,
        gt_tracks,
    )


def trackset_to_frameset(tracks, mode, scored=False):
    frames = {}
    for video, video_tracks in tracks.items():
        for tid, track in video_tracks.items():
            for fi, geom in track["frames"].items():
                key = (video, fi)
                if key not in frames:
                    frames[key] = Frame(
                        name=f"{video}-{fi:04d}", video_name=video, frame_index=fi
                    )
                item = {"id": tid, "category": track["category"], "geom": geom}
                if scored:
                    item["score"] = 1.0
                frames[key].labels.append(_label_from_plain(item, mode, scored=scored))
    return FrameSet(frames=list(frames.values()))


def fragment_track(length: int, k: int):
    """One gt track of `length` frames against k equal pred fragments."""
    box = (0.0, 0.0, 10.0, 10.0)
    gt = {"vid": {"g0": {"category": "car", "frames": {fi: box for fi in range(length)}}}}
    frag = length // k
    pred_tracks = {}
    for i in range(k):
        frames = {fi: box for fi in range(i * frag, (i + 1) * frag)}
        pred_tracks[f"p{i}"] = {"category": "car", "frames": frames}
    pred = {"vid": pred_tracks}
    return pred, gt


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
