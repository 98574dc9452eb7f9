"""Differential-drive robot: spec limits, kinematics, deadband goal controller.

The robot is a 3.2 cm cube driving on a tracking mat.  Commands are
(v, omega) pairs in cm/s and deg/s, always clamped to the spec before they
touch the pose.  The controller is rotate-then-drive: align the heading at
full rotation speed while the bearing error is large, then drive at the
capped linear speed with proportional heading correction, and emit nothing
at all once inside the goal tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import NonFiniteInput
from .geometry import Pose2D, wrap_angle

# Controller shape: rotate in place above this bearing error, drive below it.
ALIGN_THRESHOLD_DEG = 20.0
# Proportional heading gain while driving (deg/s per deg of error).
HEADING_GAIN = 4.0
# Goal almost directly behind and close: back up instead of turning around.
REVERSE_ANGLE_DEG = 160.0
REVERSE_DISTANCE_CM = 3.0
# Heading goals count as met within this band.
HEADING_TOLERANCE_DEG = 5.0


@dataclass(frozen=True)
class RobotSpec:
    """Hardware limits and control defaults for one robot."""

    footprint: tuple[float, float] = (3.2, 3.2)  # cm
    height: float = 2.5  # cm
    max_linear_speed: float = 35.0  # cm/s, hardware ceiling
    cap_linear_speed: float = 17.5  # cm/s, tracking-safe operating cap
    max_angular_speed: float = 1500.0  # deg/s
    report_period: float = 0.010  # s between position reports
    goal_tolerance: float = 1.1  # cm
    push_capacity: float = 32.0  # grams

    def __post_init__(self):
        if not (0.0 < self.cap_linear_speed <= self.max_linear_speed):
            raise ValueError("need 0 < cap_linear_speed <= max_linear_speed")
        if self.goal_tolerance <= 0.0 or self.report_period <= 0.0:
            raise ValueError("goal_tolerance and report_period must be positive")

    @property
    def contact_radius(self) -> float:
        return self.footprint[0] / 2.0


DEFAULT_SPEC = RobotSpec()


@dataclass(frozen=True)
class MotorCommand:
    v: float = 0.0  # cm/s, signed
    omega: float = 0.0  # deg/s, signed

    @property
    def is_stop(self) -> bool:
        return self.v == 0.0 and self.omega == 0.0


STOP = MotorCommand()


@dataclass
class RobotState:
    robot_id: int
    pose: Pose2D
    v: float = 0.0
    omega: float = 0.0
    grabbed_by_local: bool = False


@dataclass(frozen=True)
class GoalSpec:
    """Where a robot should go; heading only checked when requested."""

    target: tuple[float, float]
    target_heading: float | None = None
    tolerance: float | None = None  # None -> spec default
    priority: int = 0

    def __post_init__(self):
        if self.tolerance is not None and self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")

    def resolved_tolerance(self, spec: RobotSpec) -> float:
        return self.tolerance if self.tolerance is not None else spec.goal_tolerance


def clamp_command(cmd: MotorCommand, spec: RobotSpec) -> MotorCommand:
    if not (math.isfinite(cmd.v) and math.isfinite(cmd.omega)):
        raise NonFiniteInput("non-finite motor command")
    v = max(-spec.cap_linear_speed, min(spec.cap_linear_speed, cmd.v))
    omega = max(-spec.max_angular_speed, min(spec.max_angular_speed, cmd.omega))
    return MotorCommand(v, omega)


def step_kinematics(
    state: RobotState, cmd: MotorCommand, dt: float, spec: RobotSpec = DEFAULT_SPEC
) -> RobotState:
    """Advance the pose by exact unicycle integration over ``dt`` seconds."""
    if not (math.isfinite(dt) and 0.0 < dt <= 0.1):
        raise ValueError(f"dt must be in (0, 0.1], got {dt}")
    cmd = clamp_command(cmd, spec)
    theta0 = math.radians(state.pose.theta)
    omega_rad = math.radians(cmd.omega)
    if abs(omega_rad) < 1e-12:
        x = state.pose.x + cmd.v * dt * math.cos(theta0)
        y = state.pose.y + cmd.v * dt * math.sin(theta0)
    else:
        # Closed form of the constant-(v, omega) arc.
        radius = cmd.v / omega_rad
        theta1 = theta0 + omega_rad * dt
        x = state.pose.x + radius * (math.sin(theta1) - math.sin(theta0))
        y = state.pose.y - radius * (math.cos(theta1) - math.cos(theta0))
    pose = Pose2D(x, y, state.pose.theta + cmd.omega * dt)
    return replace(state, pose=pose, v=cmd.v, omega=cmd.omega)


def is_at_goal(state: RobotState, goal: GoalSpec, spec: RobotSpec = DEFAULT_SPEC) -> bool:
    """Inside the goal deadband (and heading band, when the goal has one)."""
    tol = goal.resolved_tolerance(spec)
    if state.pose.distance_to(goal.target) > tol:
        return False
    if goal.target_heading is None:
        return True
    return abs(wrap_angle(goal.target_heading - state.pose.theta)) <= HEADING_TOLERANCE_DEG


def goto_controller(
    state: RobotState, goal: GoalSpec, spec: RobotSpec = DEFAULT_SPEC
) -> MotorCommand:
    """Motor command steering toward the goal; exactly (0, 0) inside it."""
    if is_at_goal(state, goal, spec):
        return STOP
    tol = goal.resolved_tolerance(spec)
    distance = state.pose.distance_to(goal.target)

    if distance <= tol:
        # Position already good; only the requested heading is off.
        err = wrap_angle(goal.target_heading - state.pose.theta)
        return clamp_command(MotorCommand(0.0, HEADING_GAIN * err), spec)

    bearing = math.degrees(
        math.atan2(goal.target[1] - state.pose.y, goal.target[0] - state.pose.x)
    )
    err = wrap_angle(bearing - state.pose.theta)

    if abs(err) > REVERSE_ANGLE_DEG and distance < REVERSE_DISTANCE_CM:
        return clamp_command(MotorCommand(-spec.cap_linear_speed, 0.0), spec)
    if abs(err) > ALIGN_THRESHOLD_DEG:
        return MotorCommand(0.0, math.copysign(spec.max_angular_speed, err))
    return clamp_command(MotorCommand(spec.cap_linear_speed, HEADING_GAIN * err), spec)


def time_to_reach_bound(
    distance: float, initial_heading_error: float, spec: RobotSpec = DEFAULT_SPEC
) -> float:
    """Analytic upper bound on time to goal: full turn, then straight drive.

    The simulated robot must beat this with at most a 25% margin.
    """
    if distance < 0.0:
        raise ValueError("distance must be non-negative")
    turn = abs(initial_heading_error) / spec.max_angular_speed
    drive = max(0.0, distance - spec.goal_tolerance) / spec.cap_linear_speed
    return turn + drive
