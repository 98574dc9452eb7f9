"""Scenario definitions: JSON schema parsing, validation, script sampling.

A scenario describes both rooms (mats, robots, objects, constraints,
attachments), the bindings and widgets wiring them together, the link
model, and scripted input streams as piecewise-linear timed waypoints.
Parsing applies defaults and resolves every cross-reference; the resolved
dictionary is embedded verbatim in the run log header so a replay needs no
side files.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .coupling import (
    MODE_FINGER_FOLLOW,
    MODE_MINIATURE_BODY,
    MODES,
    Binding,
    TouchZone,
)
from .errors import ConfigError
from .geometry import MatFrame, Pose2D, Transform2D, mats_overlap, wrap_angle
from .robot import DEFAULT_SPEC, RobotSpec, RobotState
from .widgets import WidgetSpec
from .world import Attachment, Constraint, PassiveObject, World

SCHEMA_VERSION = 1

ROOM_NAMES = ("remote", "local")


def bundled_scenario_names() -> list[str]:
    files = resources.files("swarmlink").joinpath("scenarios")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def load_scenario_dict(name_or_path: str) -> dict:
    """Load a scenario by bundled name (``d1``) or filesystem path."""
    path = Path(name_or_path)
    if path.exists():
        return json.loads(path.read_text())
    candidate = resources.files("swarmlink").joinpath(f"scenarios/{name_or_path}.json")
    if candidate.is_file():
        return json.loads(candidate.read_text())
    raise ConfigError("$", f"no scenario file or bundled scenario named {name_or_path!r}")


def _get(d: dict, key: str, path: str, kind=None, default=..., choices=None):
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}.{key}", "missing required field")
        return default
    value = d[key]
    if kind is not None and not isinstance(value, kind):
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        else:
            raise ConfigError(f"{path}.{key}", f"expected {kind}, got {type(value).__name__}")
    if choices is not None and value not in choices:
        raise ConfigError(f"{path}.{key}", f"must be one of {choices}, got {value!r}")
    return value


def _point(raw, path: str) -> tuple[float, float]:
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise ConfigError(path, "expected [x, y]")
    return (float(raw[0]), float(raw[1]))


@dataclass
class Waypoints:
    """Timed piecewise-linear path: [[t, x, y] or [t, x, y, theta], ...]."""

    points: list[list[float]]

    def __post_init__(self):
        if not self.points:
            raise ValueError("waypoint list may not be empty")
        times = [p[0] for p in self.points]
        if times != sorted(times):
            raise ValueError("waypoint times must be non-decreasing")
        arities = {len(p) for p in self.points}
        if len(arities) != 1 or arities & {0, 1, 2}:
            raise ValueError("waypoints must be uniformly [t, x, y] or [t, x, y, theta]")

    def sample(self, t: float) -> tuple[float, ...]:
        """Linear interpolation; clamps before the first and after the last
        waypoint; headings interpolate along the shortest arc.  Duplicate
        times encode a step change that takes effect exactly at that time."""
        pts = self.points
        if t <= pts[0][0]:
            return tuple(pts[0][1:])
        if t >= pts[-1][0]:
            return tuple(pts[-1][1:])
        i = 0
        while i + 1 < len(pts) and pts[i + 1][0] <= t + 1e-9:
            i += 1
        a, b = pts[i], pts[i + 1]
        u = (t - a[0]) / (b[0] - a[0])
        u = min(max(u, 0.0), 1.0)
        out = [a[1] + u * (b[1] - a[1]), a[2] + u * (b[2] - a[2])]
        if len(a) >= 4:
            out.append(a[3] + u * wrap_angle(b[3] - a[3]))
        return tuple(out)


@dataclass
class LinkParams:
    latency_ms: float = 0.0
    jitter_ms: float = 0.0
    loss: float = 0.0
    allow_reorder: bool = False


@dataclass
class RoomSpec:
    mats: list[MatFrame] = field(default_factory=list)
    robots: list[tuple[RobotState, RobotSpec]] = field(default_factory=list)
    objects: list[PassiveObject] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    attachments: list[Attachment] = field(default_factory=list)
    touch_zones: list[TouchZone] = field(default_factory=list)

    def robot_ids(self) -> set[int]:
        return {state.robot_id for state, _ in self.robots}

    def build_world(self, sensor_quantum: float, report_period: float) -> World:
        w = World(
            mats=list(self.mats),
            sensor_quantum=sensor_quantum,
            report_period=report_period,
        )
        for state, spec in self.robots:
            w.add_robot(
                RobotState(robot_id=state.robot_id, pose=state.pose), spec
            )
        for obj in self.objects:
            w.objects[obj.object_id] = PassiveObject(
                object_id=obj.object_id, x=obj.x, y=obj.y, theta=obj.theta,
                mass=obj.mass, footprint_radius=obj.footprint_radius, kind=obj.kind,
            )
        w.constraints = list(self.constraints)
        w.attachments = [
            Attachment(robot_id=a.robot_id, kind=a.kind, color=a.color, pen_down=a.pen_down)
            for a in self.attachments
        ]
        w.validate()
        return w


@dataclass
class RobotPathScript:
    robot_id: int
    waypoints: Waypoints


@dataclass
class VirtualObjectScript:
    object_id: int
    waypoints: Waypoints


@dataclass
class HandScript:
    hand_id: int
    fingers: dict[str, Waypoints]
    grabs: list[dict] = field(default_factory=list)  # {t, state, object}


@dataclass
class SkeletonScript:
    skeleton_id: int
    scale: float
    joints: dict[str, Waypoints]


@dataclass
class GrabWindow:
    robot_id: int
    t: float
    duration_s: float
    dx: float
    dy: float


@dataclass
class TimedValue:
    t: float
    target: int  # widget or robot id
    value: float | bool


@dataclass
class TriggerMark:
    t: float
    label: str
    robot_id: int | None = None


@dataclass
class Scripts:
    remote_robot_paths: list[RobotPathScript] = field(default_factory=list)
    virtual_objects: list[VirtualObjectScript] = field(default_factory=list)
    hands: list[HandScript] = field(default_factory=list)
    skeletons: list[SkeletonScript] = field(default_factory=list)
    local_grabs: list[GrabWindow] = field(default_factory=list)
    widget_sets: list[TimedValue] = field(default_factory=list)
    pen_events: list[TimedValue] = field(default_factory=list)
    triggers: list[TriggerMark] = field(default_factory=list)


@dataclass
class ScenarioSpec:
    scenario_id: str
    description: str
    seed: int
    duration_s: float
    dt_s: float
    sensor_quantum: float
    report_period: float
    hand_rate_hz: float
    body_rate_hz: float
    link: LinkParams
    calibration: Transform2D
    rooms: dict[str, RoomSpec]
    bindings: list[Binding]
    widgets: list[WidgetSpec]
    scripts: Scripts
    metric_config: dict
    resolved: dict  # canonical form, embedded in the log header


def _parse_mat(raw: dict, path: str) -> MatFrame:
    origin = raw.get("origin", {})
    mat = MatFrame(
        mat_id=_get(raw, "id", path, int),
        width=_get(raw, "width_cm", path, float, 55.0),
        height=_get(raw, "height_cm", path, float, 55.0),
        origin_in_world=Transform2D.from_dict(origin),
        orientation_mode=_get(
            raw, "orientation", path, str, "horizontal",
            choices=("horizontal", "vertical"),
        ),
        tiling_offset=tuple(raw["tile"]) if "tile" in raw else None,
    )
    return mat


def _parse_robot(raw: dict, path: str) -> tuple[RobotState, RobotSpec]:
    rid = _get(raw, "id", path, int)
    pose = Pose2D(
        _get(raw, "x", path, float),
        _get(raw, "y", path, float),
        _get(raw, "theta", path, float, 0.0),
    )
    overrides = raw.get("spec", {})
    known = {
        "max_linear_speed", "cap_linear_speed", "max_angular_speed",
        "report_period", "goal_tolerance", "push_capacity",
    }
    bad = set(overrides) - known
    if bad:
        raise ConfigError(f"{path}.spec", f"unknown spec fields {sorted(bad)}")
    spec = RobotSpec(**{k: float(v) for k, v in overrides.items()}) if overrides else DEFAULT_SPEC
    return RobotState(robot_id=rid, pose=pose), spec


def _parse_object(raw: dict, path: str) -> PassiveObject:
    return PassiveObject(
        object_id=_get(raw, "id", path, int),
        x=_get(raw, "x", path, float),
        y=_get(raw, "y", path, float),
        theta=_get(raw, "theta", path, float, 0.0),
        mass=_get(raw, "mass_g", path, float),
        footprint_radius=_get(raw, "radius_cm", path, float),
        kind=_get(raw, "kind", path, str, "other"),
    )


def _parse_constraint(raw: dict, path: str) -> Constraint:
    kind = _get(raw, "kind", path, str,
                choices=("line_segment", "ring_boundary", "ring_region"))
    subjects = tuple(_get(raw, "robots", path, list))
    if kind == "line_segment":
        return Constraint(
            constraint_id=_get(raw, "id", path, int), kind=kind,
            subject_robot_ids=subjects,
            a=_point(raw.get("a"), f"{path}.a"), b=_point(raw.get("b"), f"{path}.b"),
        )
    return Constraint(
        constraint_id=_get(raw, "id", path, int), kind=kind,
        subject_robot_ids=subjects,
        center=_point(raw.get("center"), f"{path}.center"),
        radius=_get(raw, "radius_cm", path, float),
    )


def _parse_room(raw: dict, path: str) -> RoomSpec:
    room = RoomSpec(
        mats=[_parse_mat(m, f"{path}.mats[{i}]") for i, m in enumerate(raw.get("mats", []))],
        robots=[_parse_robot(r, f"{path}.robots[{i}]") for i, r in enumerate(raw.get("robots", []))],
        objects=[_parse_object(o, f"{path}.objects[{i}]") for i, o in enumerate(raw.get("objects", []))],
        constraints=[
            _parse_constraint(c, f"{path}.constraints[{i}]")
            for i, c in enumerate(raw.get("constraints", []))
        ],
        attachments=[
            Attachment(
                robot_id=_get(a, "robot", f"{path}.attachments[{i}]", int),
                kind=_get(a, "kind", f"{path}.attachments[{i}]", str),
                color=a.get("color"),
                pen_down=bool(a.get("down", False)),
            )
            for i, a in enumerate(raw.get("attachments", []))
        ],
        touch_zones=[
            TouchZone(
                zone_id=_get(z, "id", f"{path}.touch_zones[{i}]", int),
                center=_point(z.get("center"), f"{path}.touch_zones[{i}].center"),
                radius=_get(z, "radius_cm", f"{path}.touch_zones[{i}]", float),
            )
            for i, z in enumerate(raw.get("touch_zones", []))
        ],
    )
    seen = set()
    for state, _ in room.robots:
        if state.robot_id in seen:
            raise ConfigError(f"{path}.robots", f"duplicate robot id {state.robot_id}")
        seen.add(state.robot_id)
    tiled = [m for m in room.mats if m.tiling_offset is not None]
    for i, a in enumerate(tiled):
        for b in tiled[i + 1 :]:
            if a.tiling_offset != b.tiling_offset and mats_overlap(a, b):
                raise ConfigError(f"{path}.mats", "tiled mats overlap")
    return room


def _parse_waypoints(raw, path: str) -> Waypoints:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(path, "expected a non-empty waypoint list")
    try:
        return Waypoints([[float(v) for v in p] for p in raw])
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, f"bad waypoints: {exc}") from exc


def _parse_scripts(raw: dict, path: str) -> Scripts:
    s = Scripts()
    for i, p in enumerate(raw.get("remote_robot_paths", [])):
        s.remote_robot_paths.append(
            RobotPathScript(
                robot_id=_get(p, "robot", f"{path}.remote_robot_paths[{i}]", int),
                waypoints=_parse_waypoints(p.get("waypoints"), f"{path}.remote_robot_paths[{i}].waypoints"),
            )
        )
    for i, p in enumerate(raw.get("virtual_objects", [])):
        s.virtual_objects.append(
            VirtualObjectScript(
                object_id=_get(p, "id", f"{path}.virtual_objects[{i}]", int),
                waypoints=_parse_waypoints(p.get("waypoints"), f"{path}.virtual_objects[{i}].waypoints"),
            )
        )
    for i, p in enumerate(raw.get("hands", [])):
        fingers = {
            name: _parse_waypoints(w, f"{path}.hands[{i}].fingers.{name}")
            for name, w in p.get("fingers", {}).items()
        }
        s.hands.append(
            HandScript(
                hand_id=_get(p, "hand", f"{path}.hands[{i}]", int, 1),
                fingers=fingers,
                grabs=list(p.get("grabs", [])),
            )
        )
    for i, p in enumerate(raw.get("skeletons", [])):
        joints = {
            name: _parse_waypoints(w, f"{path}.skeletons[{i}].joints.{name}")
            for name, w in p.get("joints", {}).items()
        }
        s.skeletons.append(
            SkeletonScript(
                skeleton_id=_get(p, "skeleton", f"{path}.skeletons[{i}]", int, 1),
                scale=_get(p, "scale", f"{path}.skeletons[{i}]", float, 1.0),
                joints=joints,
            )
        )
    for i, p in enumerate(raw.get("local_grabs", [])):
        s.local_grabs.append(
            GrabWindow(
                robot_id=_get(p, "robot", f"{path}.local_grabs[{i}]", int),
                t=_get(p, "t", f"{path}.local_grabs[{i}]", float),
                duration_s=_get(p, "duration_s", f"{path}.local_grabs[{i}]", float, 0.5),
                dx=_get(p, "dx_cm", f"{path}.local_grabs[{i}]", float, 0.0),
                dy=_get(p, "dy_cm", f"{path}.local_grabs[{i}]", float, 0.0),
            )
        )
    for i, p in enumerate(raw.get("widget_sets", [])):
        s.widget_sets.append(
            TimedValue(
                t=_get(p, "t", f"{path}.widget_sets[{i}]", float),
                target=_get(p, "widget", f"{path}.widget_sets[{i}]", int),
                value=float(_get(p, "value", f"{path}.widget_sets[{i}]", float)),
            )
        )
    for i, p in enumerate(raw.get("pen_events", [])):
        s.pen_events.append(
            TimedValue(
                t=_get(p, "t", f"{path}.pen_events[{i}]", float),
                target=_get(p, "robot", f"{path}.pen_events[{i}]", int),
                value=bool(p.get("down", True)),
            )
        )
    for i, p in enumerate(raw.get("triggers", [])):
        s.triggers.append(
            TriggerMark(
                t=_get(p, "t", f"{path}.triggers[{i}]", float),
                label=_get(p, "label", f"{path}.triggers[{i}]", str),
                robot_id=p.get("robot"),
            )
        )
    return s


def _parse_widget(raw: dict, path: str) -> WidgetSpec:
    kind = _get(raw, "kind", path, str, choices=("control_points", "slider", "knob", "button"))
    common = dict(
        widget_id=_get(raw, "id", path, int),
        kind=kind,
        bound_robot_ids=list(_get(raw, "robots", path, list)),
    )
    if kind == "control_points":
        return WidgetSpec(
            **common,
            base_size=_point(raw.get("base_size_cm"), f"{path}.base_size_cm"),
        )
    if kind == "slider":
        track_raw = raw.get("track")
        if not isinstance(track_raw, list) or len(track_raw) != 2:
            raise ConfigError(f"{path}.track", "expected [[ax, ay], [bx, by]]")
        return WidgetSpec(
            **common,
            track=(
                _point(track_raw[0], f"{path}.track[0]"),
                _point(track_raw[1], f"{path}.track[1]"),
            ),
        )
    if kind == "knob":
        return WidgetSpec(
            **common,
            angle_range=_point(raw.get("angle_range_deg"), f"{path}.angle_range_deg"),
            param_range=(
                _point(raw.get("param_range"), f"{path}.param_range")
                if "param_range" in raw
                else (0.0, 1.0)
            ),
        )
    return WidgetSpec(
        **common,
        trigger_point=_point(raw.get("trigger"), f"{path}.trigger"),
        trigger_radius=_get(raw, "radius_cm", path, float),
    )


def parse_scenario(raw: dict, overrides: dict | None = None) -> ScenarioSpec:
    """Validate a scenario dict, apply defaults and CLI overrides, resolve refs."""
    cfg = copy.deepcopy(raw)
    if overrides:
        for key in ("seed", "duration_s"):
            if overrides.get(key) is not None:
                cfg[key] = overrides[key]
        link_cfg = cfg.setdefault("link", {})
        for src, dst in (
            ("latency_ms", "latency_ms"),
            ("jitter_ms", "jitter_ms"),
            ("loss", "loss"),
        ):
            if overrides.get(src) is not None:
                link_cfg[dst] = overrides[src]

    scenario_id = _get(cfg, "id", "$", str)
    duration = _get(cfg, "duration_s", "$", float)
    if duration <= 0:
        raise ConfigError("$.duration_s", "duration must be positive")
    dt = _get(cfg, "dt_s", "$", float, 0.005)
    if not (0.0 < dt <= 0.02):
        raise ConfigError("$.dt_s", "dt must be in (0, 0.02]")

    link_raw = cfg.get("link", {})
    link = LinkParams(
        latency_ms=_get(link_raw, "latency_ms", "$.link", float, 0.0),
        jitter_ms=_get(link_raw, "jitter_ms", "$.link", float, 0.0),
        loss=_get(link_raw, "loss", "$.link", float, 0.0),
        allow_reorder=bool(link_raw.get("allow_reorder", False)),
    )
    if not (0.0 <= link.loss < 1.0):
        raise ConfigError("$.link.loss", "loss must be in [0, 1)")

    rooms_raw = cfg.get("rooms", {})
    rooms = {
        name: _parse_room(rooms_raw.get(name, {}), f"$.rooms.{name}")
        for name in ROOM_NAMES
    }

    bindings = []
    binding_ids = set()
    for i, b in enumerate(cfg.get("bindings", [])):
        path = f"$.bindings[{i}]"
        mode = _get(b, "mode", path, str, choices=MODES)
        source = _get(b, "source", path)
        if mode in (MODE_FINGER_FOLLOW, MODE_MINIATURE_BODY):
            if not isinstance(source, str):
                raise ConfigError(f"{path}.source", "expected a finger/joint name")
        elif not isinstance(source, int):
            raise ConfigError(f"{path}.source", "expected a numeric source id")
        binding = Binding(
            binding_id=_get(b, "id", path, int),
            mode=mode,
            source_key=source,
            target_robot_id=_get(b, "target", path, int),
            tolerance_override=(
                float(b["tolerance_cm"]) if b.get("tolerance_cm") is not None else None
            ),
            priority=_get(b, "priority", path, int, 0),
        )
        if binding.binding_id in binding_ids:
            raise ConfigError(path, f"duplicate binding id {binding.binding_id}")
        binding_ids.add(binding.binding_id)
        if binding.target_robot_id not in rooms["local"].robot_ids():
            raise ConfigError(
                f"{path}.target",
                f"robot {binding.target_robot_id} not in rooms.local",
            )
        bindings.append(binding)

    scripts = _parse_scripts(cfg.get("scripts", {}), "$.scripts")

    vo_ids = {vo.object_id for vo in scripts.virtual_objects}
    remote_ids = rooms["remote"].robot_ids()
    for i, b in enumerate(bindings):
        if b.mode in ("mirror", "virtual_grasp") and b.source_key not in remote_ids | vo_ids:
            raise ConfigError(
                f"$.bindings[{i}].source",
                f"source {b.source_key} matches no remote robot or virtual object",
            )

    widgets = []
    widget_ids = set()
    for i, w in enumerate(cfg.get("widgets", [])):
        path = f"$.widgets[{i}]"
        widget = _parse_widget(w, path)
        if widget.widget_id in widget_ids:
            raise ConfigError(path, f"duplicate widget id {widget.widget_id}")
        widget_ids.add(widget.widget_id)
        for rid in widget.bound_robot_ids:
            if rid not in rooms["local"].robot_ids():
                raise ConfigError(f"{path}.robots", f"robot {rid} not in rooms.local")
        widgets.append(widget)

    for i, p in enumerate(scripts.remote_robot_paths):
        if p.robot_id not in remote_ids:
            raise ConfigError(
                f"$.scripts.remote_robot_paths[{i}].robot",
                f"robot {p.robot_id} not in rooms.remote",
            )
    for i, g in enumerate(scripts.local_grabs):
        if g.robot_id not in rooms["local"].robot_ids():
            raise ConfigError(
                f"$.scripts.local_grabs[{i}].robot",
                f"robot {g.robot_id} not in rooms.local",
            )
    for i, ws in enumerate(scripts.widget_sets):
        if ws.target not in widget_ids:
            raise ConfigError(
                f"$.scripts.widget_sets[{i}].widget", f"widget {ws.target} undefined"
            )

    metric_config = cfg.get("metrics", {})
    start_cfg = metric_config.get("start_latency")
    if start_cfg is not None:
        labels = {t.label for t in scripts.triggers}
        if start_cfg.get("trigger") not in labels:
            raise ConfigError(
                "$.metrics.start_latency.trigger",
                f"trigger {start_cfg.get('trigger')!r} not in scripts.triggers",
            )
    lag_cfg = metric_config.get("mirror_lag")
    if lag_cfg is not None and lag_cfg.get("binding") not in binding_ids:
        raise ConfigError(
            "$.metrics.mirror_lag.binding",
            f"binding {lag_cfg.get('binding')!r} undefined",
        )

    cfg.setdefault("dt_s", dt)
    cfg["link"] = {
        "latency_ms": link.latency_ms,
        "jitter_ms": link.jitter_ms,
        "loss": link.loss,
        "allow_reorder": link.allow_reorder,
    }
    cfg.setdefault("seed", 0)
    cfg.setdefault("sensor_quantum_cm", 0.1)
    cfg.setdefault("report_period_s", DEFAULT_SPEC.report_period)
    cfg.setdefault("hand_rate_hz", 60.0)
    cfg.setdefault("body_rate_hz", 30.0)
    cfg.setdefault("calibration", {})

    return ScenarioSpec(
        scenario_id=scenario_id,
        description=cfg.get("description", ""),
        seed=int(cfg["seed"]),
        duration_s=duration,
        dt_s=dt,
        sensor_quantum=float(cfg["sensor_quantum_cm"]),
        report_period=float(cfg["report_period_s"]),
        hand_rate_hz=float(cfg["hand_rate_hz"]),
        body_rate_hz=float(cfg["body_rate_hz"]),
        link=link,
        calibration=Transform2D.from_dict(cfg["calibration"]),
        rooms=rooms,
        bindings=bindings,
        widgets=widgets,
        scripts=scripts,
        metric_config=metric_config,
        resolved=cfg,
    )


def load_scenario(name_or_path: str, overrides: dict | None = None) -> ScenarioSpec:
    return parse_scenario(load_scenario_dict(name_or_path), overrides)
