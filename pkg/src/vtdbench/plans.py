"""Training-protocol artifacts: batch schedules, pseudo-label filters and
curriculum stage plans.

Plans are declarative JSON documents for external trainers; nothing here
executes training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .labels import IGNORE_INDEX, Frame, FrameSet, Keypoints, Label, SemanticMap

PLAN_VERSION = "1"

STRATEGIES = ("round_robin", "none", "uniform", "weighted")

TASKS = (
    "tagging",
    "drivable",
    "lane",
    "sem_seg",
    "ins_seg",
    "det",
    "pose",
    "flow",
    "mot",
    "mots",
)

POSE_SCORE_THRESHOLD = 0.2
SEG_CONFIDENCE_THRESHOLD = 0.3


@dataclass(frozen=True)
class ImageSetSpec:
    id: str
    count: int
    tasks: tuple[str, ...] = ()

    def __post_init__(self):
        if self.count <= 0:
            raise ValidationError(f"image set '{self.id}' must have count > 0")


def canonical_sets(use_mots_subset: bool = True) -> list[ImageSetSpec]:
    """The three training image sets at their canonical training sizes;
    the tracking set shrinks to its mask-annotated subset by default."""
    tracking_count = 31_000 if use_mots_subset else 280_000
    return [
        ImageSetSpec("detection", 70_000, ("tagging", "det", "pose", "drivable", "lane")),
        ImageSetSpec("segmentation", 6_500, ("ins_seg", "sem_seg")),
        ImageSetSpec("tracking", tracking_count, ("mot", "mots")),
    ]


@dataclass
class SchedulePlan:
    strategy: str
    seed: int
    batch_size: int
    epochs: int
    sets: list
    batches: list  # {"epoch": int, "set": str | None, "samples": [[set, idx], ...]}
    epoch_starts: list

    def to_document(self) -> dict:
        return {
            "version": PLAN_VERSION,
            "kind": "schedule",
            "strategy": self.strategy,
            "seed": self.seed,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "sets": [{"id": s.id, "count": s.count, "tasks": list(s.tasks)} for s in self.sets],
            "epoch_starts": self.epoch_starts,
            "batches": self.batches,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, separators=(",", ":"))


def _chunk(indices: list[int], batch_size: int) -> list[list[int]]:
    return [indices[i : i + batch_size] for i in range(0, len(indices), batch_size)]


def build_schedule(
    sets: list[ImageSetSpec],
    batch_size: int,
    strategy: str = "round_robin",
    seed: int = 0,
    epochs: int = 1,
) -> SchedulePlan:
    """Deterministic batch schedule over partially-annotated image sets.

    round_robin cycles the sets in declared order, skipping exhausted
    ones, each sample exactly once per epoch; none makes one shuffled
    pass over the union; uniform/weighted draw each batch's set from the
    corresponding distribution, reshuffling a set when it runs out.
    """
    if not sets:
        raise ValidationError("at least one image set is required")
    if len({s.id for s in sets}) != len(sets):
        raise ValidationError("duplicate image set ids")
    if batch_size < 1:
        raise ValidationError(f"batch_size must be >= 1, got {batch_size}")
    if epochs < 1:
        raise ValidationError(f"epochs must be >= 1, got {epochs}")
    if strategy not in STRATEGIES:
        raise ValidationError(
            f"unknown strategy '{strategy}', expected one of {list(STRATEGIES)}"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    batches: list[dict] = []
    epoch_starts: list[int] = []
    for epoch in range(epochs):
        epoch_starts.append(len(batches))
        if strategy == "round_robin":
            _round_robin_epoch(sets, batch_size, rng, epoch, batches)
        elif strategy == "none":
            _pooled_epoch(sets, batch_size, rng, epoch, batches)
        else:
            _stochastic_epoch(sets, batch_size, rng, epoch, batches, strategy)
    return SchedulePlan(
        strategy=strategy,
        seed=seed,
        batch_size=batch_size,
        epochs=epochs,
        sets=list(sets),
        batches=batches,
        epoch_starts=epoch_starts,
    )


def _shuffled_indices(count: int, rng) -> list[int]:
    order = np.arange(count)
    rng.shuffle(order)
    return order.tolist()


def _round_robin_epoch(sets, batch_size, rng, epoch, batches):
    queues = {s.id: _chunk(_shuffled_indices(s.count, rng), batch_size) for s in sets}
    cursors = {s.id: 0 for s in sets}
    order = [s.id for s in sets]
    while True:
        emitted = False
        for set_id in order:
            queue = queues[set_id]
            cursor = cursors[set_id]
            if cursor >= len(queue):
                continue  # exhausted mid-epoch: keep cycling the rest
            batches.append(
                {
                    "epoch": epoch,
                    "set": set_id,
                    "samples": [[set_id, idx] for idx in queue[cursor]],
                }
            )
            cursors[set_id] += 1
            emitted = True
        if not emitted:
            break


def _pooled_epoch(sets, batch_size, rng, epoch, batches):
    pool = [[s.id, idx] for s in sets for idx in range(s.count)]
    order = np.arange(len(pool))
    rng.shuffle(order)
    shuffled = [pool[i] for i in order.tolist()]
    for chunk_start in range(0, len(shuffled), batch_size):
        samples = shuffled[chunk_start : chunk_start + batch_size]
        batches.append({"epoch": epoch, "set": None, "samples": samples})


def _stochastic_epoch(sets, batch_size, rng, epoch, batches, strategy):
    # epoch length mirrors the round-robin batch count; sets resample with
    # replacement at set level, samples without replacement until a set
    # exhausts and reshuffles
    n_batches = sum(-(-s.count // batch_size) for s in sets)
    if strategy == "uniform":
        probs = np.full(len(sets), 1.0 / len(sets))
    else:
        total = sum(s.count for s in sets)
        probs = np.array([s.count / total for s in sets])
    queues = {s.id: _shuffled_indices(s.count, rng) for s in sets}
    positions = {s.id: 0 for s in sets}
    for _ in range(n_batches):
        choice = int(rng.choice(len(sets), p=probs))
        set_spec = sets[choice]
        samples = []
        for _ in range(min(batch_size, set_spec.count)):
            if positions[set_spec.id] >= set_spec.count:
                queues[set_spec.id] = _shuffled_indices(set_spec.count, rng)
                positions[set_spec.id] = 0
            samples.append([set_spec.id, queues[set_spec.id][positions[set_spec.id]]])
            positions[set_spec.id] += 1
        batches.append({"epoch": epoch, "set": set_spec.id, "samples": samples})


def filter_pose_pseudolabels(fs: FrameSet, threshold: float = POSE_SCORE_THRESHOLD) -> FrameSet:
    """Drop joints scored strictly below the threshold (marked invisible);
    labels left without any surviving joint are removed."""
    frames = []
    for frame in fs.frames:
        labels = []
        for label in frame.labels:
            if label.graph is None:
                labels.append(label)
                continue
            joints = tuple(
                (x, y, s) if s >= threshold else (x, y, 0.0)
                for x, y, s in label.graph.joints
            )
            if not any(s >= threshold for _, _, s in joints):
                continue
            labels.append(
                Label(
                    id=label.id,
                    category=label.category,
                    score=label.score,
                    box2d=label.box2d,
                    rle=label.rle,
                    poly2d=label.poly2d,
                    graph=Keypoints(joints=joints),
                    attributes=dict(label.attributes),
                )
            )
        frames.append(
            Frame(
                name=frame.name,
                video_name=frame.video_name,
                frame_index=frame.frame_index,
                attributes=dict(frame.attributes),
                labels=labels,
                map_path=frame.map_path,
                confidence_path=frame.confidence_path,
                flow_path=frame.flow_path,
            )
        )
    return FrameSet(frames=frames, base_dir=fs.base_dir)


def filter_seg_pseudolabels(
    seg_map: SemanticMap, threshold: float = SEG_CONFIDENCE_THRESHOLD
) -> SemanticMap:
    """Set pixels with confidence strictly below the threshold to ignore."""
    if seg_map.confidence is None:
        raise ValidationError("semantic map has no confidence channel to filter on")
    classes = seg_map.classes.copy()
    classes[seg_map.confidence < threshold] = IGNORE_INDEX
    return SemanticMap(classes=classes, confidence=seg_map.confidence.copy())


# Training-recipe metadata carried opaquely into plans; external trainers
# interpret these strings.
BASELINE_RECIPES = {
    "tagging": {"lr": 0.1, "optimizer": "SGD", "batch_size": 48, "epochs": 60,
                "schedule": "step decay at [30, 45]"},
    "det": {"lr": 0.04, "optimizer": "SGD", "batch_size": 32, "epochs": 36,
            "schedule": "step decay at [24, 33]"},
    "ins_seg": {"lr": 0.02, "optimizer": "SGD", "batch_size": 16, "epochs": 36,
                "schedule": "step decay at [24, 33]"},
    "pose": {"lr": 0.02, "optimizer": "SGD", "batch_size": 16, "epochs": 36,
             "schedule": "step decay at [24, 33]"},
    "mot": {"lr": 0.02, "optimizer": "SGD", "batch_size": 16, "epochs": 12,
            "schedule": "step decay at [8, 11]"},
    "mots": {"lr": 0.01, "optimizer": "SGD", "batch_size": 16, "epochs": 12,
             "schedule": "step decay at [8, 11]"},
    "joint": {"lr": 0.0001, "optimizer": "AdamW", "batch_size": 16, "epochs": 12,
              "schedule": "step decay at [8, 11]"},
}


@dataclass
class Stage:
    kind: str  # pretrain | joint | finetune
    name: str
    tasks: tuple[str, ...]
    epochs: int
    lr_multiplier: float = 1.0
    lr_decay_epochs: tuple[int, ...] = ()
    data_sources: tuple[str, ...] = ()
    pseudo_label_tasks: tuple[str, ...] = ()
    frozen: tuple[str, ...] = ()
    sampling: str | None = None
    substages: tuple = ()
    metadata: dict = field(default_factory=dict)

    def to_document(self) -> dict:
        doc = {
            "kind": self.kind,
            "name": self.name,
            "tasks": list(self.tasks),
            "epochs": self.epochs,
            "lr_multiplier": self.lr_multiplier,
            "lr_decay_epochs": list(self.lr_decay_epochs),
            "data_sources": list(self.data_sources),
            "pseudo_label_tasks": list(self.pseudo_label_tasks),
            "frozen": list(self.frozen),
            "sampling": self.sampling,
            "metadata": self.metadata,
        }
        if self.substages:
            doc["substages"] = [s.to_document() for s in self.substages]
        return doc


@dataclass
class StagePlan:
    stages: list

    def to_document(self) -> dict:
        return {
            "version": PLAN_VERSION,
            "kind": "curriculum",
            "stages": [s.to_document() for s in self.stages],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, separators=(",", ":"))


@dataclass
class CurriculumConfig:
    joint_epochs: int = 12
    decay_epochs: tuple[int, ...] = (8, 11)
    finetune_epochs: int = 6
    finetune_lr_mult: float = 0.1
    use_pseudolabels: bool = True
    use_mots_subset: bool = True


_PRETRAIN_TASKS = ("det", "ins_seg", "pose", "mot", "mots")

_TASK_SETS = {
    "tagging": ("detection",),
    "drivable": ("detection",),
    "lane": ("detection",),
    "det": ("detection",),
    "pose": ("detection",),
    "sem_seg": ("segmentation",),
    "ins_seg": ("segmentation",),
    "mot": ("tracking",),
    "mots": ("tracking:mots_subset",),
    "flow": ("tracking:mots_subset",),
}


def curriculum_plan(cfg: CurriculumConfig | None = None) -> StagePlan:
    """Three-phase plan: pretrain localization/tracking, joint round-robin
    training over all ten tasks, then one frozen-trunk stage per decoder."""
    if cfg is None:
        cfg = CurriculumConfig()
    if cfg.joint_epochs < 0 or cfg.finetune_epochs < 0:
        raise ValidationError("epoch counts must be non-negative")

    substages = (
        Stage(
            kind="pretrain",
            name="detector_tracker",
            tasks=("det", "mot"),
            epochs=BASELINE_RECIPES["mot"]["epochs"],
            data_sources=("detection", "tracking"),
            metadata={"recipes": {k: BASELINE_RECIPES[k] for k in ("det", "mot")}},
        ),
        Stage(
            kind="pretrain",
            name="mask_pose_decoders",
            tasks=("ins_seg", "pose", "mots"),
            epochs=BASELINE_RECIPES["ins_seg"]["epochs"],
            data_sources=("segmentation", "tracking:mots_subset"),
            frozen=("feature_extractor", "detection_decoder", "tracking_decoder"),
            metadata={
                "recipes": {k: BASELINE_RECIPES[k] for k in ("ins_seg", "pose", "mots")}
            },
        ),
    )
    pretrain = Stage(
        kind="pretrain",
        name="pretrain",
        tasks=_PRETRAIN_TASKS,
        epochs=sum(s.epochs for s in substages),
        data_sources=("detection", "segmentation", "tracking"),
        substages=substages,
        metadata={"note": "two-phase initialization before joint training"},
    )

    tracking_source = "tracking:mots_subset" if cfg.use_mots_subset else "tracking"
    joint = Stage(
        kind="joint",
        name="joint",
        tasks=TASKS,
        epochs=cfg.joint_epochs,
        lr_decay_epochs=tuple(cfg.decay_epochs),
        data_sources=("detection", "segmentation", tracking_source),
        pseudo_label_tasks=("pose", "sem_seg") if cfg.use_pseudolabels else (),
        sampling="round_robin",
        metadata={"recipes": {"joint": BASELINE_RECIPES["joint"]}},
    )

    stages = [pretrain, joint]
    if cfg.finetune_epochs > 0:
        for task in TASKS:
            stages.append(
                Stage(
                    kind="finetune",
                    name=f"finetune_{task}",
                    tasks=(task,),
                    epochs=cfg.finetune_epochs,
                    lr_multiplier=cfg.finetune_lr_mult,
                    data_sources=_TASK_SETS[task],
                    frozen=("all_shared_weights",) + tuple(
                        f"{t}_decoder" for t in TASKS if t != task
                    ),
                )
            )
    return StagePlan(stages=stages)
