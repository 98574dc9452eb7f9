"""Two-room tabletop robot synchronization over a lossy datagram link."""

from .geometry import (
    CalibrationRecord,
    MatFrame,
    Pose2D,
    Transform2D,
    calibrate_manual,
    compose,
    identity,
    relocalize_from_anchor,
)
from .robot import (
    DEFAULT_SPEC,
    GoalSpec,
    MotorCommand,
    RobotSpec,
    RobotState,
    goto_controller,
    is_at_goal,
    step_kinematics,
    time_to_reach_bound,
)
from .world import (
    Attachment,
    Constraint,
    PassiveObject,
    World,
    apply_constraint,
    resolve_push,
    step_world,
)
from .coupling import Binding, BodySkeleton, Coupler, HandPose, assign_fingers
from .net import ReplicaStore, SimulatedLink
from .protocol import Message, decode, encode

__version__ = "0.1.0"

__all__ = [
    "Attachment",
    "Binding",
    "BodySkeleton",
    "CalibrationRecord",
    "Constraint",
    "Coupler",
    "DEFAULT_SPEC",
    "GoalSpec",
    "HandPose",
    "MatFrame",
    "Message",
    "MotorCommand",
    "PassiveObject",
    "Pose2D",
    "ReplicaStore",
    "RobotSpec",
    "RobotState",
    "SimulatedLink",
    "Transform2D",
    "World",
    "apply_constraint",
    "assign_fingers",
    "calibrate_manual",
    "compose",
    "decode",
    "encode",
    "goto_controller",
    "identity",
    "is_at_goal",
    "relocalize_from_anchor",
    "resolve_push",
    "step_kinematics",
    "step_world",
    "time_to_reach_bound",
]
