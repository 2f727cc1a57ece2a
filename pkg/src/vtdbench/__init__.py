"""Benchmark evaluation and training-plan toolkit for the ten-task
driving-video challenge: per-task metrics, the composite score, and
curriculum/pseudo-label/fine-tune plan generation."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    EmptyMetricError,
    EmptySplitError,
    FormatError,
    ShapeError,
    ValidationError,
    VtdError,
)
from .labels import (  # noqa: F401
    Box2D,
    Frame,
    FrameSet,
    Keypoints,
    Label,
    Poly2D,
    SemanticMap,
    parse_label_file,
    load_label_file,
    rasterize_poly2d,
)
from .rle import RleMask, rle_decode, rle_encode  # noqa: F401
from .flo import FlowField, load_flow, read_flow, save_flow, write_flow  # noqa: F401
from .geometry import (  # noqa: F401
    Matching,
    box_iou,
    dilate,
    mask_iou,
    oks,
    solve_assignment,
)
from .clsseg import (  # noqa: F401
    ConfusionMatrix,
    LaneConfig,
    TaskScore,
    accumulate_confusion,
    lane_boundary_iou,
    miou,
    tagging_accuracy,
)
from .apeval import APConfig, APReport, evaluate_ap, tracking_ap  # noqa: F401
from .assoc import assa, flow_pair_ious, flow_proxy_iou, warp_mask  # noqa: F401
from .vtda import (  # noqa: F401
    GROUPS,
    SLOTS,
    GroupScores,
    ScalingTable,
    default_scales,
    estimate_sigmas,
    scale_factor,
    vtda,
)
from .plans import (  # noqa: F401
    CurriculumConfig,
    ImageSetSpec,
    SchedulePlan,
    StagePlan,
    build_schedule,
    canonical_sets,
    curriculum_plan,
    filter_pose_pseudolabels,
    filter_seg_pseudolabels,
)
from .tasks import evaluate_task, run_evaluation, validate_file  # noqa: F401
