"""Kinematics, conditioning and workspace analysis of the Orthoglide 3-axis parallel machine."""

__version__ = "0.1.0"

from .analysis import (
    AnalysisReport,
    Classification,
    analyze,
    classify_singularity,
    condition_number,
    isotropy_check,
    manipulability,
)
from .design import DesignResult, size_joint_limits, size_metrics
from .kinematics import (
    JacobianSet,
    KinematicState,
    forward_kinematics,
    inverse_kinematics,
    jacobians,
    joint_rates,
    velocity_map,
)
from .model import (
    LegGeometry,
    MachineGeometry,
    canonical_orthoglide,
    load_geometry,
    save_geometry,
    validate,
)
from .workspace import (
    OctreeWorkspace,
    PointPredicate,
    compute_octree,
    cross_section,
    evaluate_point,
    scalar_field,
    t_connected,
)
