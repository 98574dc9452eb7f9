"""Couples input streams to robot goals.

A binding names one input source (a replicated remote robot, a grabbed
virtual proxy, a fingertip, a skeleton joint, or the avatar hand) and one
local robot.  Each tick the coupler resolves every active binding against
a snapshot of the latest inputs, holds the last goal across transient
source dropouts, and suspends remote control for robots a local human is
physically holding.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from .geometry import Point, Pose2D, Transform2D, identity
from .robot import GoalSpec, RobotState
from .world import RobotObservation

logger = logging.getLogger(__name__)

MODE_MIRROR = "mirror"
MODE_VIRTUAL_GRASP = "virtual_grasp"
MODE_FINGER_FOLLOW = "finger_follow"
MODE_MINIATURE_BODY = "miniature_body"
MODE_HAPTIC_TOUCH = "haptic_touch"
MODES = (
    MODE_MIRROR,
    MODE_VIRTUAL_GRASP,
    MODE_FINGER_FOLLOW,
    MODE_MINIATURE_BODY,
    MODE_HAPTIC_TOUCH,
)

FINGERS = ("thumb", "index", "pinky")
# Single-robot demos use the index finger, so it claims a robot first.
FINGER_PRIORITY = ("index", "thumb", "pinky")

MINIATURE_BODY_TOLERANCE = 0.4  # cm
DEFAULT_BODY_JOINT = "pelvis"
# Bindings survive this long without fresh source data before deactivating.
SOURCE_TIMEOUT_S = 1.0


@dataclass
class Binding:
    binding_id: int
    mode: str
    source_key: int | str
    target_robot_id: int
    tolerance_override: float | None = None
    active: bool = True
    priority: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"bad binding mode {self.mode!r}")
        if self.mode == MODE_MINIATURE_BODY:
            self.tolerance_override = MINIATURE_BODY_TOLERANCE


@dataclass
class HandPose:
    timestamp: float
    fingers: dict[str, Point] = field(default_factory=dict)
    grab_state: str = "open"  # "open" | "pinching"
    grabbed_object: int | None = None

    def __post_init__(self):
        for name, (x, y) in self.fingers.items():
            if name not in FINGERS:
                raise ValueError(f"unknown finger {name!r}")
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError(f"non-finite coordinate for finger {name}")
        if self.grab_state not in ("open", "pinching"):
            raise ValueError(f"bad grab_state {self.grab_state!r}")


@dataclass
class BodySkeleton:
    timestamp: float
    joints: dict[str, Point] = field(default_factory=dict)
    world_to_miniature_scale: float = 1.0

    def __post_init__(self):
        if self.world_to_miniature_scale <= 0.0:
            raise ValueError("world_to_miniature_scale must be positive")


@dataclass(frozen=True)
class TouchZone:
    """Registered disc on the mat where the local user can be touched."""

    zone_id: int
    center: Point
    radius: float


@dataclass
class CouplingInputs:
    """Snapshot of the latest replicated inputs, taken once per tick."""

    now: float
    observations: dict[int, tuple[Pose2D, float]] = field(default_factory=dict)
    hands: dict[int, HandPose] = field(default_factory=dict)
    skeletons: dict[int, BodySkeleton] = field(default_factory=dict)
    touch_zones: list[TouchZone] = field(default_factory=list)
    calibration: Transform2D = field(default_factory=identity)


def assign_fingers(
    fingers_present: set[str], robots_available: list[int]
) -> dict[str, int]:
    """Deterministic finger-to-robot assignment: index > thumb > pinky,
    robots taken in ascending id; leftovers stay unbound."""
    robots = sorted(robots_available)
    out: dict[str, int] = {}
    for finger in FINGER_PRIORITY:
        if finger in fingers_present and robots:
            out[finger] = robots.pop(0)
    return out


def detect_manual_grab(
    observations: list[RobotObservation],
    commanded_speed: float,
    tolerance: float = 1.1,
) -> bool:
    """True when the latest observed displacement exceeds what the last
    issued command could have produced by more than twice the tolerance."""
    if len(observations) < 3:
        return False
    prev, last = observations[-2], observations[-1]
    dt = last.t - prev.t
    if dt <= 0.0:
        return False
    displacement = math.hypot(last.pose.x - prev.pose.x, last.pose.y - prev.pose.y)
    return displacement > abs(commanded_speed) * dt + 2.0 * tolerance


def _project_out_of_zones(
    point: Point, zones: list[TouchZone], prefer: Point | None = None
) -> Point:
    """Clamp a goal onto the boundary of any zone containing it, so the
    robot meets the person instead of driving into them.  A point exactly
    on a zone center is ambiguous; ``prefer`` (the previous goal) picks the
    approach side."""
    x, y = point
    for z in zones:
        d = math.hypot(x - z.center[0], y - z.center[1])
        if d < z.radius:
            if d < 1e-9:
                px, py = prefer if prefer is not None else (z.center[0] + 1.0, z.center[1])
                pd = math.hypot(px - z.center[0], py - z.center[1])
                ux, uy = ((px - z.center[0]) / pd, (py - z.center[1]) / pd) if pd > 1e-9 else (1.0, 0.0)
                x, y = z.center[0] + ux * z.radius, z.center[1] + uy * z.radius
            else:
                x = z.center[0] + (x - z.center[0]) * z.radius / d
                y = z.center[1] + (y - z.center[1]) * z.radius / d
    return (x, y)


class Coupler:
    """Evaluates bindings against input snapshots, one call per tick."""

    def __init__(self, bindings: list[Binding]):
        self.bindings = list(bindings)
        self._held_goals: dict[int, GoalSpec] = {}
        self._last_seen: dict[int, float] = {}

    def binding(self, binding_id: int) -> Binding | None:
        for b in self.bindings:
            if b.binding_id == binding_id:
                return b
        return None

    def _source_point(self, b: Binding, inputs: CouplingInputs) -> Point | None:
        cal = inputs.calibration
        if b.mode in (MODE_MIRROR, MODE_VIRTUAL_GRASP):
            entry = inputs.observations.get(b.source_key)
            if entry is None:
                return None
            return cal.apply(entry[0].position)
        if b.mode == MODE_FINGER_FOLLOW:
            for hand in inputs.hands.values():
                if b.source_key in hand.fingers:
                    return cal.apply(hand.fingers[b.source_key])
            return None
        if b.mode == MODE_MINIATURE_BODY:
            joint = b.source_key if isinstance(b.source_key, str) else DEFAULT_BODY_JOINT
            for sk in inputs.skeletons.values():
                if joint in sk.joints:
                    jx, jy = sk.joints[joint]
                    s = sk.world_to_miniature_scale
                    return cal.apply((jx * s, jy * s))
            return None
        if b.mode == MODE_HAPTIC_TOUCH:
            hand = inputs.hands.get(b.source_key)
            if hand is None or "index" not in hand.fingers:
                return None
            mapped = cal.apply(hand.fingers["index"])
            last = self._held_goals.get(b.binding_id)
            return _project_out_of_zones(
                mapped, inputs.touch_zones, last.target if last else None
            )
        return None

    def compute_goals(
        self, inputs: CouplingInputs
    ) -> dict[int, list[tuple[int, GoalSpec]]]:
        """Candidate goals per robot as (binding_id, goal) pairs.

        Missing sources hold the previous goal; after SOURCE_TIMEOUT_S of
        silence the binding is deactivated and logged (unresolved source).
        A source that has never produced data yet is pending, not silent:
        replication lag makes every binding unresolvable at cold start.
        """
        candidates: dict[int, list[tuple[int, GoalSpec]]] = {}
        for b in self.bindings:
            if not b.active:
                continue
            point = self._source_point(b, inputs)
            if point is not None:
                self._last_seen[b.binding_id] = inputs.now
                goal = GoalSpec(
                    target=point,
                    tolerance=b.tolerance_override,
                    priority=b.priority,
                )
                self._held_goals[b.binding_id] = goal
            else:
                if b.binding_id not in self._last_seen:
                    continue  # pending: no data yet
                goal = self._held_goals.get(b.binding_id)
                silent = inputs.now - self._last_seen[b.binding_id]
                if silent > SOURCE_TIMEOUT_S:
                    b.active = False
                    logger.warning(
                        "binding %d deactivated: source %r unresolved for %.2fs",
                        b.binding_id,
                        b.source_key,
                        silent,
                    )
                    continue
                if goal is None:
                    continue
            candidates.setdefault(b.target_robot_id, []).append((b.binding_id, goal))
        return candidates

    def active_goals(
        self, inputs: CouplingInputs, robot_states: dict[int, RobotState]
    ) -> dict[int, GoalSpec]:
        return resolve_conflicts(self.compute_goals(inputs), robot_states)


def apply_bind_ctl(coupler: Coupler, payload) -> bool:
    """Apply a BIND_CTL message to a live binding set (the runtime control
    channel).  Returns False when the binding id is unknown."""
    binding = coupler.binding(payload.binding_id)
    if binding is None:
        return False
    binding.active = payload.active
    if payload.tolerance is not None and binding.mode != MODE_MINIATURE_BODY:
        binding.tolerance_override = payload.tolerance
    binding.priority = payload.priority
    return True


def resolve_conflicts(
    candidates: dict[int, list[tuple[int, GoalSpec]]],
    robot_states: dict[int, RobotState],
) -> dict[int, GoalSpec]:
    """At most one goal per robot: manual grabs suspend remote control,
    otherwise the highest priority wins and ties go to the lowest binding id."""
    goals: dict[int, GoalSpec] = {}
    for rid, entries in candidates.items():
        state = robot_states.get(rid)
        if state is not None and state.grabbed_by_local:
            continue
        best = min(entries, key=lambda e: (-e[1].priority, e[0]))
        goals[rid] = best[1]
    return goals
