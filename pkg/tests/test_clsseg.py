import numpy as np
import pytest

from vtdbench.clsseg import (
    ConfusionMatrix,
    LaneConfig,
    accumulate_confusion,
    lane_boundary_iou,
    miou,
    tagging_accuracy,
)
from vtdbench.errors import EmptyMetricError, EmptySplitError, ShapeError, ValidationError
from vtdbench.geometry import dilate
from vtdbench.labels import Frame, FrameSet, Label, Poly2D, SemanticMap, rasterize_poly2d


def tag_frame(name, weather=None, scene=None):
    attributes = {}
    if weather:
        attributes["weather"] = weather
    if scene:
        attributes["scene"] = scene
    return Frame(name=name, attributes=attributes)


# ------------------------------------------------------------- tagging


def test_tagging_all_correct():
    gts = FrameSet(frames=[tag_frame(f"f{i}", weather="clear") for i in range(3)])
    preds = FrameSet(frames=[tag_frame(f"f{i}", weather="clear") for i in range(3)])
    assert tagging_accuracy(preds, gts, "weather").value == 100.0


def test_tagging_one_of_three():
    gts = FrameSet(frames=[
        tag_frame("a", weather="clear"),
        tag_frame("b", weather="rainy"),
        tag_frame("c", weather="snowy"),
    ])
    preds = FrameSet(frames=[
        tag_frame("a", weather="clear"),
        tag_frame("b", weather="clear"),
        tag_frame("c", weather="clear"),
    ])
    assert tagging_accuracy(preds, gts, "weather").value == pytest.approx(100 / 3)


def test_tagging_undefined_counts_as_class():
    gts = FrameSet(frames=[
        tag_frame("a", weather="clear"),
        tag_frame("b", weather="undefined"),
        tag_frame("c", weather="rainy"),
        tag_frame("d", weather="rainy"),
    ])
    preds = FrameSet(frames=[
        tag_frame("a", weather="clear"),
        tag_frame("b", weather="undefined"),
        tag_frame("c", weather="clear"),
        tag_frame("d", weather="rainy"),
    ])
    # hand enumeration: correct on a, b, d
    assert tagging_accuracy(preds, gts, "weather").value == pytest.approx(75.0)
    # with undefined-gt frames excluded: correct on a, d out of 3
    assert tagging_accuracy(
        preds, gts, "weather", exclude_undefined_gt=True
    ).value == pytest.approx(200 / 3)


def test_tagging_missing_prediction_is_wrong():
    gts = FrameSet(frames=[tag_frame("a", weather="clear"), tag_frame("b", weather="clear")])
    preds = FrameSet(frames=[tag_frame("a", weather="clear")])
    assert tagging_accuracy(preds, gts, "weather").value == 50.0


def test_tagging_100_iff_all_match(rng):
    weathers = ("clear", "rainy", "snowy", "overcast")
    for _ in range(20):
        gts = FrameSet(frames=[
            tag_frame(f"f{i}", weather=weathers[int(rng.integers(0, 4))])
            for i in range(6)
        ])
        flips = rng.random(6) < 0.3
        preds = FrameSet(frames=[
            tag_frame(
                f.name,
                weather=f.attributes["weather"] if not flip else "foggy",
            )
            for f, flip in zip(gts.frames, flips)
        ])
        score = tagging_accuracy(preds, gts, "weather").value
        assert 0.0 <= score <= 100.0
        assert (score == 100.0) == (not flips.any())


def test_tagging_empty_split():
    with pytest.raises(EmptySplitError):
        tagging_accuracy(FrameSet(frames=[]), FrameSet(frames=[]), "weather")


# ------------------------------------------------------------ confusion


def seg_map(values):
    return SemanticMap(classes=np.asarray(values, dtype=np.int64))


def test_confusion_diagonal_on_perfect():
    rng = np.random.default_rng(0)
    gt = rng.integers(0, 19, size=(16, 16))
    cm = accumulate_confusion(seg_map(gt), seg_map(gt), 19)
    assert cm.counts.sum() == 256
    assert np.all(cm.counts == np.diag(np.diag(cm.counts)))


def test_confusion_enumeration_example():
    gt = seg_map([[0, 1, 1, 1]])
    pred = seg_map([[0, 0, 1, 1]])
    cm = accumulate_confusion(pred, gt, 2)
    assert cm.counts[0, 0] == 1
    assert cm.counts[1, 0] == 1
    assert cm.counts[1, 1] == 2


def test_confusion_all_ignore():
    gt = seg_map(np.full((4, 4), 255))
    pred = seg_map(np.zeros((4, 4)))
    cm = accumulate_confusion(pred, gt, 3)
    assert cm.counts.sum() == 0


def test_confusion_shape_error():
    with pytest.raises(ShapeError):
        accumulate_confusion(seg_map(np.zeros((2, 2))), seg_map(np.zeros((3, 3))), 2)


def test_confusion_class_bound():
    with pytest.raises(ValidationError):
        accumulate_confusion(seg_map([[5]]), seg_map([[0]]), 3)


def test_confusion_order_independent():
    rng = np.random.default_rng(5)
    chunks = [
        (seg_map(rng.integers(0, 4, (8, 8))), seg_map(rng.integers(0, 4, (8, 8))))
        for _ in range(5)
    ]
    total_fwd = ConfusionMatrix(4)
    for pred, gt in chunks:
        total_fwd = total_fwd.add(accumulate_confusion(pred, gt, 4))
    total_rev = ConfusionMatrix(4)
    for pred, gt in reversed(chunks):
        total_rev = total_rev.add(accumulate_confusion(pred, gt, 4))
    assert total_fwd == total_rev


# ---------------------------------------------------------------- mIoU


def test_miou_diagonal_is_100():
    cm = ConfusionMatrix(3, np.diag([5, 9, 2]).astype(np.int64))
    assert miou(cm).value == 100.0


def test_miou_enumeration_example():
    gt = seg_map([[0, 1, 1, 1]])
    pred = seg_map([[0, 0, 1, 1]])
    cm = accumulate_confusion(pred, gt, 2)
    assert miou(cm).value == pytest.approx(100 * (0.5 + 2 / 3) / 2)


def test_miou_absent_classes_excluded():
    gt = seg_map([[0, 1, 1, 1]])
    pred = seg_map([[0, 0, 1, 1]])
    value = miou(accumulate_confusion(pred, gt, 2)).value
    padded = miou(accumulate_confusion(seg_map([[0, 0, 1, 1]]), gt, 7)).value
    assert value == padded


def test_miou_empty_metric():
    with pytest.raises(EmptyMetricError):
        miou(ConfusionMatrix(3), scored_classes=(1, 2))


def test_miou_drivable_foreground_perfect():
    # pixel oracle: gt-background mapped to ignore upstream, foreground exact
    gt = np.array([[0, 0, 1, 1], [2, 2, 2, 2]])
    pred = np.array([[0, 0, 1, 1], [0, 1, 0, 1]])  # background pixels mispredicted
    gt_masked = gt.copy()
    gt_masked[gt == 2] = 255
    cm = accumulate_confusion(seg_map(pred), seg_map(gt_masked), 3)
    assert miou(cm, scored_classes=(0, 1)).value == 100.0


# ---------------------------------------------------------------- lanes


def lane_label(lid, x, category="road curb", direction="parallel", style="solid"):
    return Label(
        id=lid,
        category=category,
        poly2d=(Poly2D(vertices=((float(x), 0.0), (float(x), 31.0))),),
        attributes={"laneDirection": direction, "laneStyle": style},
    )


def lane_frames(xs, name="img0"):
    return FrameSet(
        frames=[Frame(name=name, labels=[lane_label(f"l{i}", x) for i, x in enumerate(xs)])]
    )


SMALL_LANE_CFG = LaneConfig(dilation_radius=5, thickness=1.0, subsample=1000, height=32, width=32)


def test_lane_identity_is_100():
    gts = lane_frames([10])
    preds = lane_frames([10])
    assert lane_boundary_iou(preds, gts, SMALL_LANE_CFG).value == 100.0


def test_lane_empty_predictions_zero():
    gts = lane_frames([10])
    preds = FrameSet(frames=[Frame(name="img0")])
    assert lane_boundary_iou(preds, gts, SMALL_LANE_CFG).value == 0.0


def test_lane_offset_matches_pixel_oracle():
    gts = lane_frames([10])
    preds = lane_frames([13])
    score = lane_boundary_iou(preds, gts, SMALL_LANE_CFG).value
    gt_raster = rasterize_poly2d(
        [Poly2D(vertices=((10.0, 0.0), (10.0, 31.0)))], 32, 32, 1.0
    )
    pred_raster = rasterize_poly2d(
        [Poly2D(vertices=((13.0, 0.0), (13.0, 31.0)))], 32, 32, 1.0
    )
    dilated = dilate(gt_raster, 5)
    assert dilated[:, 5:16].all()
    inter = np.count_nonzero(pred_raster & dilated)
    union = np.count_nonzero(pred_raster | gt_raster)
    # same IoU on every axis, so the mean equals the single-class value
    assert score == pytest.approx(100.0 * inter / union)


def test_lane_monotone_in_radius():
    gts = lane_frames([10])
    preds = lane_frames([12, 20])
    previous = -1.0
    for radius in (0, 1, 3, 5, 8):
        cfg = LaneConfig(dilation_radius=radius, thickness=1.0, height=32, width=32)
        score = lane_boundary_iou(preds, gts, cfg).value
        assert score >= previous
        previous = score


def test_lane_subsample_deterministic():
    frames = []
    for i in range(6):
        x = 5 + i
        frames.append(
            Frame(name=f"img{i}", labels=[lane_label(f"l{i}", x)])
        )
    gts = FrameSet(frames=frames)
    preds = FrameSet(frames=[Frame(name=f.name, labels=list(f.labels)) for f in frames])
    cfg = LaneConfig(dilation_radius=2, thickness=1.0, subsample=3, height=32, width=32)
    # only the first three names in sorted order are scored
    assert lane_boundary_iou(preds, gts, cfg).value == 100.0
    # a wrong prediction outside the subsample cannot change the score
    preds.frames[-1].labels[0] = lane_label("bad", 25)
    assert lane_boundary_iou(preds, gts, cfg).value == 100.0


def test_lane_empty_split():
    with pytest.raises(EmptySplitError):
        lane_boundary_iou(FrameSet(frames=[]), FrameSet(frames=[]), SMALL_LANE_CFG)


def test_lane_axes_split_scores():
    # same geometry, wrong style: category and direction axes perfect,
    # style axis zero overlap
    gt = FrameSet(frames=[Frame(name="a", labels=[lane_label("g", 10, style="solid")])])
    pred = FrameSet(frames=[Frame(name="a", labels=[lane_label("p", 10, style="dashed")])])
    score = lane_boundary_iou(pred, gt, SMALL_LANE_CFG)
    assert score.breakdown["per_axis"]["category"] == 1.0
    assert score.breakdown["per_axis"]["direction"] == 1.0
    assert score.breakdown["per_axis"]["style"] == 0.0
    assert score.value == pytest.approx(100 * 2 / 3)
