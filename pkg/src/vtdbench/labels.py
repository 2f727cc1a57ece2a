"""Annotation domain types and the label-file codec.

Label files are UTF-8 JSON: a top-level list of frame objects following
the Scalabel layout (`name`, `videoName`, `frameIndex`, `attributes`,
`labels[...]`). The same schema is used for ground truth and predictions.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ValidationError
from .rle import RleMask, mask_from_coco, mask_to_coco

WEATHER_TAGS = (
    "rainy",
    "snowy",
    "clear",
    "overcast",
    "partly cloudy",
    "foggy",
    "undefined",
)
SCENE_TAGS = (
    "tunnel",
    "residential",
    "parking lot",
    "city street",
    "gas stations",
    "highway",
    "undefined",
)

# The eight object classes shared by detection, instance segmentation,
# pose, MOT and MOTS.
INSTANCE_CATEGORIES = (
    "pedestrian",
    "rider",
    "car",
    "truck",
    "bus",
    "train",
    "motorcycle",
    "bicycle",
)

# 11 stuff classes followed by the 8 thing classes, indices 0..18.
SEMANTIC_CLASSES = (
    "road",
    "sidewalk",
    "building",
    "wall",
    "fence",
    "pole",
    "traffic light",
    "traffic sign",
    "vegetation",
    "terrain",
    "sky",
) + INSTANCE_CATEGORIES

DRIVABLE_CLASSES = ("direct", "alternative", "background")

LANE_CATEGORIES = (
    "road curb",
    "crosswalk",
    "double white",
    "double yellow",
    "double other color",
    "single white",
    "single yellow",
    "single other color",
)
LANE_DIRECTIONS = ("parallel", "vertical")
LANE_STYLES = ("solid", "dashed")

IGNORE_INDEX = 255
NUM_JOINTS = 18


@dataclass(frozen=True)
class Box2D:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise ValidationError(
                f"degenerate box ({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


@dataclass(frozen=True)
class Keypoints:
    """Exactly 18 joints of (x, y, score) with scores in [0, 1]."""

    joints: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        if len(self.joints) != NUM_JOINTS:
            raise ValidationError(
                f"expected {NUM_JOINTS} joints, got {len(self.joints)}"
            )
        for x, y, score in self.joints:
            if not (0.0 <= score <= 1.0):
                raise ValidationError(f"joint score {score} outside [0, 1]")

    def visible(self) -> list[int]:
        return [i for i, (_, _, s) in enumerate(self.joints) if s > 0.0]


@dataclass(frozen=True)
class Poly2D:
    vertices: tuple[tuple[float, float], ...]
    types: str = ""
    closed: bool = False


@dataclass
class Label:
    id: str
    category: str | None = None
    score: float | None = None
    box2d: Box2D | None = None
    rle: RleMask | None = None
    poly2d: tuple[Poly2D, ...] | None = None
    graph: Keypoints | None = None
    attributes: dict = field(default_factory=dict)

    def has_geometry(self) -> bool:
        return any(v is not None for v in (self.box2d, self.rle, self.poly2d, self.graph))


@dataclass
class Frame:
    name: str
    video_name: str | None = None
    frame_index: int | None = None
    attributes: dict = field(default_factory=dict)
    labels: list[Label] = field(default_factory=list)
    # optional raster references, resolved relative to the label file
    map_path: str | None = None
    confidence_path: str | None = None
    flow_path: str | None = None


@dataclass
class FrameSet:
    frames: list[Frame]
    base_dir: str | None = None

    def __post_init__(self):
        self.frames.sort(key=_frame_sort_key)

    def by_name(self) -> dict[str, Frame]:
        return {f.name: f for f in self.frames}

    def videos(self) -> dict[str, list[Frame]]:
        out: dict[str, list[Frame]] = {}
        for f in self.frames:
            out.setdefault(f.video_name or "", []).append(f)
        return out


@dataclass
class SemanticMap:
    """Dense class-index map with optional per-pixel confidence."""

    classes: np.ndarray  # (H, W) integer, valid class index or IGNORE_INDEX
    confidence: np.ndarray | None = None  # (H, W) float in [0, 1]

    def __post_init__(self):
        if self.classes.ndim != 2:
            raise ValidationError(f"class map must be 2-D, got {self.classes.ndim}-D")
        if self.confidence is not None and self.confidence.shape != self.classes.shape:
            raise ValidationError(
                f"confidence shape {self.confidence.shape} != class map {self.classes.shape}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.classes.shape


def _frame_sort_key(frame: Frame):
    return (
        frame.video_name or "",
        frame.frame_index if frame.frame_index is not None else -1,
        frame.name,
    )


def _require(obj: dict, key: str, where: str):
    if key not in obj or obj[key] is None:
        raise ValidationError(f"{where}: missing required field '{key}'")
    return obj[key]


def _parse_number(value, where: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ValidationError(f"{where}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{where}: non-finite number")
    return value


def _parse_point(value, where: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) < 2:
        raise ValidationError(f"{where}: expected an [x, y] pair, got {value!r}")
    return (_parse_number(value[0], where), _parse_number(value[1], where))


def _parse_box2d(obj, where: str) -> Box2D:
    if not isinstance(obj, dict):
        raise ValidationError(f"{where}: box2d must be an object")
    return Box2D(
        x1=_parse_number(_require(obj, "x1", where), where),
        y1=_parse_number(_require(obj, "y1", where), where),
        x2=_parse_number(_require(obj, "x2", where), where),
        y2=_parse_number(_require(obj, "y2", where), where),
    )


def _parse_rle(obj, where: str) -> RleMask:
    if not isinstance(obj, dict):
        raise ValidationError(f"{where}: rle must be an object")
    counts = _require(obj, "counts", where)
    size = _require(obj, "size", where)
    if (
        not isinstance(size, (list, tuple))
        or len(size) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in size)
    ):
        raise ValidationError(f"{where}: rle size must be [height, width], got {size!r}")
    if isinstance(counts, str):
        return mask_from_coco(counts, (size[0], size[1]))
    if isinstance(counts, list):
        if not all(isinstance(c, int) and not isinstance(c, bool) for c in counts):
            raise ValidationError(f"{where}: rle counts must be integers")
        return RleMask(height=size[0], width=size[1], runs=tuple(counts))
    raise ValidationError(f"{where}: rle counts must be a string or list")


def _parse_poly2d(items, where: str) -> tuple[Poly2D, ...]:
    if not isinstance(items, list):
        raise ValidationError(f"{where}: poly2d must be a list")
    polys = []
    for i, obj in enumerate(items):
        if not isinstance(obj, dict):
            raise ValidationError(f"{where}: poly2d entries must be objects")
        verts = _require(obj, "vertices", f"{where}.poly2d[{i}]")
        if not isinstance(verts, (list, tuple)):
            raise ValidationError(f"{where}: vertices must be a list")
        vertices = tuple(_parse_point(v, where) for v in verts)
        polys.append(
            Poly2D(
                vertices=vertices,
                types=str(obj.get("types", "L" * len(vertices))),
                closed=bool(obj.get("closed", False)),
            )
        )
    return tuple(polys)


def _parse_graph(obj, where: str) -> Keypoints:
    if not isinstance(obj, dict):
        raise ValidationError(f"{where}: graph must be an object")
    nodes = _require(obj, "nodes", where)
    if not isinstance(nodes, (list, tuple)):
        raise ValidationError(f"{where}: graph nodes must be a list")
    joints = []
    for node in nodes:
        if not isinstance(node, dict):
            raise ValidationError(f"{where}: graph nodes must be objects")
        x, y = _parse_point(_require(node, "location", f"{where}.graph"), where)
        score = _parse_number(node.get("score", 1.0), f"{where}.graph")
        if not (0.0 <= score <= 1.0):
            raise ValidationError(f"{where}: joint score {score} outside [0, 1]")
        joints.append((x, y, score))
    return Keypoints(joints=tuple(joints))


def _parse_label(obj, where: str) -> Label:
    if not isinstance(obj, dict):
        raise ValidationError(f"{where}: label must be an object")
    label_id = str(_require(obj, "id", where))
    score = obj.get("score")
    if score is not None:
        score = _parse_number(score, where)
        if not (0.0 <= score <= 1.0):
            raise ValidationError(f"{where}: score {score} outside [0, 1]")
    label = Label(
        id=label_id,
        category=str(obj["category"]) if obj.get("category") is not None else None,
        score=score,
        box2d=_parse_box2d(obj["box2d"], where) if obj.get("box2d") else None,
        rle=_parse_rle(obj["rle"], where) if obj.get("rle") else None,
        poly2d=_parse_poly2d(obj["poly2d"], where) if obj.get("poly2d") else None,
        graph=_parse_graph(obj["graph"], where) if obj.get("graph") else None,
        attributes=dict(obj.get("attributes") or {}),
    )
    if not label.has_geometry():
        raise ValidationError(f"{where}: label '{label_id}' carries no geometry")
    return label


def _parse_frame(obj, index: int) -> Frame:
    where = f"frame[{index}]"
    if not isinstance(obj, dict):
        raise ValidationError(f"{where}: frame must be an object")
    name = str(_require(obj, "name", where))
    where = f"frame '{name}'"
    frame_index = obj.get("frameIndex")
    if frame_index is not None:
        if not isinstance(frame_index, int) or isinstance(frame_index, bool):
            raise ValidationError(f"{where}: frameIndex must be an integer")
        if frame_index < 0:
            raise ValidationError(f"{where}: negative frameIndex")
    attributes = dict(obj.get("attributes") or {})
    for key, vocab in (("weather", WEATHER_TAGS), ("scene", SCENE_TAGS)):
        if key in attributes and attributes[key] not in vocab:
            raise ValidationError(
                f"{where}: attribute {key}='{attributes[key]}' not in {sorted(vocab)}"
            )
    labels = [
        _parse_label(lab, f"{where}, label[{i}]")
        for i, lab in enumerate(obj.get("labels") or [])
    ]
    return Frame(
        name=name,
        video_name=str(obj["videoName"]) if obj.get("videoName") else None,
        frame_index=frame_index,
        attributes=attributes,
        labels=labels,
        map_path=str(obj["map"]) if obj.get("map") else None,
        confidence_path=str(obj["confidence"]) if obj.get("confidence") else None,
        flow_path=str(obj["flow"]) if obj.get("flow") else None,
    )


def parse_label_file(data: bytes, task: str | None = None) -> FrameSet:
    """Parse label-file bytes into a sorted FrameSet.

    Unknown fields are ignored. Malformed JSON raises FormatError with the
    byte offset; schema violations raise ValidationError naming the frame
    and field. When `task` is given, task-specific vocabulary checks from
    `validate_frameset` run as well.
    """
    try:
        doc = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise FormatError(f"label file is not UTF-8: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed label file at byte offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(doc, list):
        raise ValidationError("label file must contain a top-level list of frames")
    frames = [_parse_frame(obj, i) for i, obj in enumerate(doc)]
    _check_frame_indices(frames)
    fs = FrameSet(frames=frames)
    if task is not None:
        validate_frameset(fs, task)
    return fs


def load_label_file(path, task: str | None = None) -> FrameSet:
    with open(path, "rb") as handle:
        fs = parse_label_file(handle.read(), task=task)
    fs.base_dir = os.path.dirname(os.fspath(path))
    return fs


def _check_frame_indices(frames: list[Frame]) -> None:
    seen: set[tuple[str, int]] = set()
    for frame in frames:
        if frame.video_name is None or frame.frame_index is None:
            continue
        key = (frame.video_name, frame.frame_index)
        if key in seen:
            raise ValidationError(
                f"frame '{frame.name}': duplicate frameIndex {frame.frame_index} "
                f"in video '{frame.video_name}'"
            )
        seen.add(key)


_TRACKING_TASKS = {"mot", "mots", "mot_ap", "mot_assa", "mots_ap", "mots_assa"}
_INSTANCE_TASKS = {"det", "ins_seg", "pose"} | _TRACKING_TASKS


def validate_frameset(fs: FrameSet, task: str) -> None:
    """Task-specific schema checks on top of structural parsing."""
    if task in _INSTANCE_TASKS:
        for frame in fs.frames:
            for label in frame.labels:
                if label.category not in INSTANCE_CATEGORIES:
                    raise ValidationError(
                        f"frame '{frame.name}': category '{label.category}' not in "
                        f"the object vocabulary {sorted(INSTANCE_CATEGORIES)}"
                    )
    if task == "pose":
        for frame in fs.frames:
            for label in frame.labels:
                if label.graph is None:
                    raise ValidationError(
                        f"frame '{frame.name}': pose label '{label.id}' has no joints"
                    )
    if task == "lane":
        for frame in fs.frames:
            for label in frame.labels:
                if label.category not in LANE_CATEGORIES:
                    raise ValidationError(
                        f"frame '{frame.name}': lane category '{label.category}' unknown"
                    )
                direction = label.attributes.get("laneDirection")
                style = label.attributes.get("laneStyle")
                if direction not in LANE_DIRECTIONS:
                    raise ValidationError(
                        f"frame '{frame.name}': lane '{label.id}' laneDirection "
                        f"'{direction}' not in {list(LANE_DIRECTIONS)}"
                    )
                if style not in LANE_STYLES:
                    raise ValidationError(
                        f"frame '{frame.name}': lane '{label.id}' laneStyle "
                        f"'{style}' not in {list(LANE_STYLES)}"
                    )
    if task in _TRACKING_TASKS:
        for frame in fs.frames:
            seen_ids = set()
            for label in frame.labels:
                if label.id in seen_ids:
                    raise ValidationError(
                        f"frame '{frame.name}': duplicate track id '{label.id}' "
                        f"(one (id, frameIndex) entry allowed)"
                    )
                seen_ids.add(label.id)


def frameset_to_json(fs: FrameSet) -> list:
    """Serialize back to the documented schema (used by the filter tools)."""
    doc = []
    for frame in fs.frames:
        obj: dict = {"name": frame.name}
        if frame.video_name is not None:
            obj["videoName"] = frame.video_name
        if frame.frame_index is not None:
            obj["frameIndex"] = frame.frame_index
        if frame.attributes:
            obj["attributes"] = frame.attributes
        if frame.map_path:
            obj["map"] = frame.map_path
        if frame.confidence_path:
            obj["confidence"] = frame.confidence_path
        if frame.flow_path:
            obj["flow"] = frame.flow_path
        labels = []
        for label in frame.labels:
            lab: dict = {"id": label.id}
            if label.category is not None:
                lab["category"] = label.category
            if label.score is not None:
                lab["score"] = label.score
            if label.attributes:
                lab["attributes"] = label.attributes
            if label.box2d is not None:
                lab["box2d"] = {
                    "x1": label.box2d.x1,
                    "y1": label.box2d.y1,
                    "x2": label.box2d.x2,
                    "y2": label.box2d.y2,
                }
            if label.rle is not None:
                lab["rle"] = mask_to_coco(label.rle)
            if label.poly2d is not None:
                lab["poly2d"] = [
                    {
                        "vertices": [[x, y] for x, y in poly.vertices],
                        "types": poly.types,
                        "closed": poly.closed,
                    }
                    for poly in label.poly2d
                ]
            if label.graph is not None:
                lab["graph"] = {
                    "nodes": [
                        {"location": [x, y], "score": s}
                        for x, y, s in label.graph.joints
                    ]
                }
            labels.append(lab)
        if labels:
            obj["labels"] = labels
        doc.append(obj)
    return doc


def rasterize_poly2d(
    polys,
    height: int,
    width: int,
    thickness: float = 1.0,
    interpolate_curves: bool = False,
) -> np.ndarray:
    """Rasterize polylines: a pixel is set iff its centre lies within
    thickness/2 of any segment. Closed polylines connect last to first.

    `types` markers for Bezier control points are treated as straight
    segments; curve interpolation is reserved behind the flag.
    """
    if interpolate_curves:
        raise NotImplementedError("curve interpolation is not implemented")
    if isinstance(polys, Poly2D):
        polys = [polys]
    out = np.zeros((height, width), dtype=bool)
    radius = thickness / 2.0
    any_vertices = False
    for poly in polys:
        verts = list(poly.vertices)
        if not verts:
            continue
        any_vertices = True
        if len(verts) == 1:
            segments = [(verts[0], verts[0])]
        else:
            segments = list(zip(verts[:-1], verts[1:]))
            if poly.closed:
                segments.append((verts[-1], verts[0]))
        for (ax, ay), (bx, by) in segments:
            _mark_segment(out, ax, ay, bx, by, radius)
    if not any_vertices:
        raise ValidationError("cannot rasterize an empty vertex list")
    return out


def _mark_segment(out: np.ndarray, ax, ay, bx, by, radius: float) -> None:
    height, width = out.shape
    x_lo = max(0, int(math.floor(min(ax, bx) - radius)))
    x_hi = min(width - 1, int(math.ceil(max(ax, bx) + radius)))
    y_lo = max(0, int(math.floor(min(ay, by) - radius)))
    y_hi = min(height - 1, int(math.ceil(max(ay, by) + radius)))
    if x_lo > x_hi or y_lo > y_hi:
        return
    ys, xs = np.mgrid[y_lo : y_hi + 1, x_lo : x_hi + 1]
    dx = bx - ax
    dy = by - ay
    length_sq = dx * dx + dy * dy
    if length_sq == 0:
        dist_sq = (xs - ax) ** 2 + (ys - ay) ** 2
    else:
        t = ((xs - ax) * dx + (ys - ay) * dy) / length_sq
        t = np.clip(t, 0.0, 1.0)
        dist_sq = (xs - (ax + t * dx)) ** 2 + (ys - (ay + t * dy)) ** 2
    out[y_lo : y_hi + 1, x_lo : x_hi + 1] |= dist_sq <= radius * radius + 1e-12
