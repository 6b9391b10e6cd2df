"""berrypick: deterministic strawberry-harvesting simulator and perception stack."""

from .geometry import (
    Aabb,
    ColoredPoint,
    ColoredPointCloud,
    Rgb,
    RigidTransform,
    Vec3,
    cloud_extent,
    dump_cloud,
    load_cloud,
    merge_clouds,
    transform_cloud,
    transform_point,
)
from .scene import Scene, StrawberryTruth, detach_fruit, generate_scene, sample_surfaces
from .camera import CameraModel, CameraRig, capture, capture_rig, default_rig
from .localization import (
    LocalizationParams,
    StrawberryBox,
    boxes_of,
    crop_window,
    euclidean_cluster,
    localize,
    threshold_red,
)
from .motion import MoveRecord, RobotState, compute_z_min, plan_cycle_waypoints, robot_move
from .cutter import (
    CutModel,
    InterrupterPair,
    ToolGeometry,
    TrapResult,
    free_fall_detect,
    laser_step,
    trap_stem,
)
from .controller import (
    ControllerPhase,
    CycleReport,
    HarvestEventLog,
    cycle_metrics,
    inject_localization_error,
    run_harvest,
)

__version__ = "0.1.0"
