"""Deterministic fixed-timestep tabletop world.

One world is one room's surface: mats, robots, passive pushable objects,
mechanical constraints, and attachments (pens, magnets, props).  Stepping
is single-threaded and owns all mutation; identical inputs produce
bit-identical results.  Contact handling is quasi-static: objects within
the robot's push capacity translate along the contact normal until the
footprints just touch, heavier ones stall the robot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import UnknownRobot
from .geometry import MatFrame, Point, Pose2D
from .robot import DEFAULT_SPEC, MotorCommand, RobotSpec, RobotState, step_kinematics

ATTACHMENT_KINDS = ("shape_prop", "material_prop", "pen", "magnet", "post_it")
OBJECT_KINDS = ("furniture", "toy", "token", "other")


@dataclass
class PassiveObject:
    """An everyday object the robots may bulldoze around."""

    object_id: int
    x: float
    y: float
    mass: float  # grams
    footprint_radius: float  # cm
    theta: float = 0.0
    kind: str = "other"

    def __post_init__(self):
        if self.mass <= 0.0 or self.footprint_radius <= 0.0:
            raise ValueError("mass and footprint_radius must be positive")
        if self.kind not in OBJECT_KINDS:
            raise ValueError(f"bad object kind {self.kind!r}")

    @property
    def position(self) -> Point:
        return (self.x, self.y)


@dataclass
class Attachment:
    robot_id: int
    kind: str
    color: str | None = None
    pen_down: bool = False

    def __post_init__(self):
        if self.kind not in ATTACHMENT_KINDS:
            raise ValueError(f"bad attachment kind {self.kind!r}")


@dataclass(frozen=True)
class Constraint:
    """Mechanical movement restriction (ring, rail) applied to some robots."""

    constraint_id: int
    kind: str  # "line_segment" | "ring_boundary" | "ring_region"
    subject_robot_ids: tuple[int, ...]
    a: Point | None = None  # line endpoints
    b: Point | None = None
    center: Point | None = None  # ring geometry
    radius: float | None = None

    def __post_init__(self):
        if self.kind == "line_segment":
            if self.a is None or self.b is None:
                raise ValueError("line_segment needs endpoints a and b")
        elif self.kind in ("ring_boundary", "ring_region"):
            if self.center is None or self.radius is None or self.radius <= 0:
                raise ValueError(f"{self.kind} needs center and positive radius")
        else:
            raise ValueError(f"bad constraint kind {self.kind!r}")


def apply_constraint(pose: Pose2D, c: Constraint) -> Pose2D:
    """Orthogonal projection of the position onto the constraint set."""
    x, y = pose.x, pose.y
    if c.kind == "line_segment":
        ax, ay = c.a
        bx, by = c.b
        ex, ey = bx - ax, by - ay
        denom = ex * ex + ey * ey
        t = 0.0 if denom == 0.0 else ((x - ax) * ex + (y - ay) * ey) / denom
        t = min(max(t, 0.0), 1.0)
        px, py = ax + t * ex, ay + t * ey
    else:
        cx, cy = c.center
        d = math.hypot(x - cx, y - cy)
        if c.kind == "ring_region" and d <= c.radius:
            return pose
        if d == 0.0:
            px, py = cx + c.radius, cy  # center is equidistant; pick +x
        else:
            px, py = cx + (x - cx) * c.radius / d, cy + (y - cy) * c.radius / d
    return Pose2D(px, py, pose.theta)


@dataclass(frozen=True)
class RobotObservation:
    """One quantized position report, as the mat sensor would emit it."""

    robot_id: int
    pose: Pose2D
    t: float


def _quantize(value: float, quantum: float) -> float:
    if quantum <= 0.0:
        return value
    return round(value / quantum) * quantum


@dataclass
class World:
    mats: list[MatFrame] = field(default_factory=list)
    robots: dict[int, RobotState] = field(default_factory=dict)
    specs: dict[int, RobotSpec] = field(default_factory=dict)
    objects: dict[int, PassiveObject] = field(default_factory=dict)
    attachments: list[Attachment] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    pen_traces: dict[int, list[Point]] = field(default_factory=dict)
    clock: float = 0.0
    tick: int = 0
    rng_seed: int = 0
    sensor_quantum: float = 0.1  # cm (and deg for heading); 0 disables
    report_period: float = 0.010  # s
    # Downward drift (mat-local -y) for robots on vertical mats; magnets
    # hold well enough that the default is no slip.
    vertical_slip_cm_s: float = 0.0
    _next_report: float = 0.0

    def add_robot(self, state: RobotState, spec: RobotSpec = DEFAULT_SPEC) -> None:
        self.robots[state.robot_id] = state
        self.specs[state.robot_id] = spec

    def spec_for(self, robot_id: int) -> RobotSpec:
        return self.specs.get(robot_id, DEFAULT_SPEC)

    def robot_attachments(self, robot_id: int) -> list[Attachment]:
        return [a for a in self.attachments if a.robot_id == robot_id]

    def validate(self) -> None:
        """Structural checks: magnets on vertical mats, everything on a mat."""
        vertical = [m for m in self.mats if m.orientation_mode == "vertical"]
        for rid, state in self.robots.items():
            on_vertical = any(m.contains(state.pose.position) for m in vertical)
            if on_vertical and not any(
                a.kind == "magnet" for a in self.robot_attachments(rid)
            ):
                raise ValueError(f"robot {rid} is on a vertical mat without a magnet")
            if self.mats and not any(m.contains(state.pose.position) for m in self.mats):
                raise ValueError(f"robot {rid} is outside every mat")
        for oid, obj in self.objects.items():
            if self.mats and not any(m.contains(obj.position) for m in self.mats):
                raise ValueError(f"object {oid} is outside every mat")

    def clamp_to_mats(self, point: Point) -> Point:
        if not self.mats:
            return point
        best = None
        best_d = math.inf
        for mat in self.mats:
            if mat.contains(point):
                return point
            cand = mat.clamp(point)
            d = math.hypot(cand[0] - point[0], cand[1] - point[1])
            if d < best_d - 1e-12:
                best, best_d = cand, d
        return best

    def snapshot(self) -> dict:
        """JSON-ready view of the dynamic state (poses only, no config)."""
        return {
            "robots": {
                str(rid): [s.pose.x, s.pose.y, s.pose.theta, s.v, s.omega]
                for rid, s in self.robots.items()
            },
            "objects": {
                str(oid): [o.x, o.y, o.theta] for oid, o in self.objects.items()
            },
        }

    def sample_sensors(self) -> list[RobotObservation]:
        """Quantized reports for all robots, only on report-period boundaries."""
        if self.clock + 1e-9 < self._next_report:
            return []
        while self._next_report <= self.clock + 1e-9:
            self._next_report += self.report_period
        q = self.sensor_quantum
        return [
            RobotObservation(
                robot_id=rid,
                pose=Pose2D(
                    _quantize(s.pose.x, q),
                    _quantize(s.pose.y, q),
                    _quantize(s.pose.theta, q),
                ),
                t=self.clock,
            )
            for rid, s in self.robots.items()
        ]


def resolve_push(
    robot_pose: Pose2D,
    spec: RobotSpec,
    obj: PassiveObject,
    motion: Point,
) -> tuple[Pose2D, Pose2D]:
    """Quasi-static contact between one robot motion and one object.

    ``robot_pose`` is the pre-motion pose and ``motion`` the proposed
    displacement.  Light objects are shoved along the contact normal until
    the footprints just touch; heavy objects truncate the robot's motion at
    the contact point instead.
    """
    old = (robot_pose.x, robot_pose.y)
    new = (old[0] + motion[0], old[1] + motion[1])
    new_pose = Pose2D(new[0], new[1], robot_pose.theta)
    contact = spec.contact_radius + obj.footprint_radius
    obj_pose = Pose2D(obj.x, obj.y, obj.theta)

    d_new = math.hypot(obj.x - new[0], obj.y - new[1])
    if d_new >= contact - 1e-12:
        return new_pose, obj_pose  # grazing or separated: neither is disturbed

    if obj.mass <= spec.push_capacity:
        if d_new > 1e-12:
            nx, ny = (obj.x - new[0]) / d_new, (obj.y - new[1]) / d_new
        else:
            m = math.hypot(*motion)
            nx, ny = (motion[0] / m, motion[1] / m) if m > 1e-12 else (1.0, 0.0)
        return new_pose, Pose2D(new[0] + nx * contact, new[1] + ny * contact, obj.theta)

    # Too heavy: stall the robot where its footprint first meets the object.
    mx, my = motion
    fx, fy = old[0] - obj.x, old[1] - obj.y
    a = mx * mx + my * my
    if a < 1e-18:
        return new_pose, obj_pose
    b = 2.0 * (fx * mx + fy * my)
    c = fx * fx + fy * fy - contact * contact
    disc = b * b - 4.0 * a * c
    if disc <= 0.0:
        return new_pose, obj_pose
    s = (-b - math.sqrt(disc)) / (2.0 * a)
    s = min(max(s, 0.0), 1.0)
    stalled = Pose2D(old[0] + s * mx, old[1] + s * my, robot_pose.theta)
    return stalled, obj_pose


def step_world(
    world: World,
    commands: dict[int, MotorCommand],
    dt: float,
    pose_overrides: dict[int, Pose2D] | None = None,
) -> World:
    """Advance the room by one fixed timestep.

    ``pose_overrides`` imposes externally-driven poses (a hand physically
    moving a robot); overridden robots skip motor integration but still
    participate in contact resolution via their imposed motion.
    """
    if not (0.0 < dt <= 0.02):
        raise ValueError(f"dt must be in (0, 0.02], got {dt}")
    overrides = pose_overrides or {}
    for rid in list(commands) + list(overrides):
        if rid not in world.robots:
            raise UnknownRobot(f"robot {rid} not in world")

    old_positions: dict[int, Point] = {}
    for rid, state in world.robots.items():
        old_positions[rid] = state.pose.position
        if rid in overrides:
            state.pose = overrides[rid]
            state.v = 0.0
            state.omega = 0.0
        elif rid in commands:
            stepped = step_kinematics(state, commands[rid], dt, world.spec_for(rid))
            state.pose = stepped.pose
            state.v = stepped.v
            state.omega = stepped.omega
        else:
            state.v = 0.0
            state.omega = 0.0

    if world.vertical_slip_cm_s > 0.0:
        vertical = [m for m in world.mats if m.orientation_mode == "vertical"]
        for rid, state in world.robots.items():
            if rid in overrides:
                continue
            for mat in vertical:
                if mat.contains(state.pose.position):
                    lx, ly = mat.world_to_mat(state.pose.position)
                    slipped = mat.mat_to_world((lx, ly - world.vertical_slip_cm_s * dt))
                    state.pose = Pose2D(slipped[0], slipped[1], state.pose.theta)
                    break

    def constrain(rid: int, state: RobotState) -> None:
        for c in world.constraints:
            if rid in c.subject_robot_ids:
                state.pose = apply_constraint(state.pose, c)

    for rid, state in world.robots.items():
        constrain(rid, state)
        cx, cy = world.clamp_to_mats(state.pose.position)
        state.pose = Pose2D(cx, cy, state.pose.theta)

    # Robot-object contacts, quasi-static.
    for rid, state in world.robots.items():
        spec = world.spec_for(rid)
        ox, oy = old_positions[rid]
        motion = (state.pose.x - ox, state.pose.y - oy)
        for obj in world.objects.values():
            pre = Pose2D(ox, oy, state.pose.theta)
            new_robot, new_obj = resolve_push(pre, spec, obj, motion)
            if new_obj.position != obj.position:
                nx, ny = world.clamp_to_mats(new_obj.position)
                obj.x, obj.y = nx, ny
                # Mat edge may have blocked the shove; stall the robot then.
                if (
                    math.hypot(obj.x - new_robot.x, obj.y - new_robot.y)
                    < spec.contact_radius + obj.footprint_radius - 1e-9
                ):
                    heavy = PassiveObject(
                        object_id=obj.object_id,
                        x=obj.x,
                        y=obj.y,
                        mass=spec.push_capacity + 1.0,
                        footprint_radius=obj.footprint_radius,
                    )
                    new_robot, _ = resolve_push(pre, spec, heavy, motion)
            state.pose = new_robot
            motion = (state.pose.x - ox, state.pose.y - oy)

    # Robot-robot overlaps: symmetric minimal separation along the center line.
    ids = sorted(world.robots)
    for i, ra in enumerate(ids):
        for rb in ids[i + 1 :]:
            sa, sb = world.robots[ra], world.robots[rb]
            min_d = world.spec_for(ra).contact_radius + world.spec_for(rb).contact_radius
            dx, dy = sb.pose.x - sa.pose.x, sb.pose.y - sa.pose.y
            d = math.hypot(dx, dy)
            if d >= min_d - 1e-12:
                continue
            if d < 1e-12:
                dx, dy, d = 1.0, 0.0, 1.0  # coincident: separate along +x
            push = (min_d - d) / 2.0
            ux, uy = dx / d, dy / d
            sa.pose = Pose2D(sa.pose.x - ux * push, sa.pose.y - uy * push, sa.pose.theta)
            sb.pose = Pose2D(sb.pose.x + ux * push, sb.pose.y + uy * push, sb.pose.theta)

    # Constraints win over separation; re-project and re-clamp.
    for rid, state in world.robots.items():
        constrain(rid, state)
        cx, cy = world.clamp_to_mats(state.pose.position)
        state.pose = Pose2D(cx, cy, state.pose.theta)

    for att in world.attachments:
        if att.kind == "pen" and att.pen_down and att.robot_id in world.robots:
            trace = world.pen_traces.setdefault(att.robot_id, [])
            trace.append(world.robots[att.robot_id].pose.position)

    world.tick += 1
    world.clock += dt
    return world
