"""Object-level intent from noisy 2D gaze, with confidence-weighted shared control.

The library turns a stream of gaze points into a per-object confidence field,
keeps that intent anchored through micro-saccades and object motion, matches
human-view detections to robot-side 3D objects, and drives a simulated
end-effector through a glance / say / confirm interaction loop.
"""

from gazeintent.geometry import (
    Circle,
    ConeUndefined,
    DegenerateInput,
    Point2,
    motion_cos,
    segment_circle_intersections,
    tangent_cone_cos,
)
from gazeintent.scene import (
    BBox,
    InvalidBox,
    ObjectRegion,
    SceneFrame,
    TopologyGraph,
    WorkspaceObject,
    build_topology,
    decompose_bbox,
)
from gazeintent.intent import (
    ConfidenceField,
    EvidencePair,
    GazeSample,
    IntentParams,
    baseline_distribution,
    baseline_fixation,
    baseline_knn,
    direction_evidence,
    distance_evidence,
    empty_field,
    update_field,
)
from gazeintent.alignment import (
    Assignment,
    CameraPose,
    NormBox,
    alignment_accuracy,
    iou,
    match_objects,
    project_object,
)
from gazeintent.control import (
    ControlParams,
    EffectorState,
    Event,
    InteractionState,
    Mode,
    NoCandidate,
    commit_intent,
    integrate_effector,
    post_command_velocity,
    pre_command_velocity,
    step_interaction,
    virtual_target,
)
from gazeintent.planner import Plan, PlanningError, Primitive, expand_plan, parse_command

__version__ = "0.1.0"
