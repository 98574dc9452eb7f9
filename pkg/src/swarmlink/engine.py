"""Two-room session: scripted inputs, link, replication, coupling, logging.

One session owns both rooms and the simulated channel between them.  Every
tick it advances the scripted (or live-injected) input streams, samples
the remote room's sensors onto the wire, delivers whatever the link has
ready, recomputes goals and motor commands on the local side, steps both
worlds, and appends JSON-canonical records to the run log.  Identical
scenario plus seed gives a byte-identical log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .coupling import (
    MODE_HAPTIC_TOUCH,
    BodySkeleton,
    Coupler,
    CouplingInputs,
    HandPose,
    detect_manual_grab,
    resolve_conflicts,
)
from .geometry import Pose2D
from .net import ReplicaStore, SequenceCounters, SimulatedLink
from .protocol import (
    BODY_POSE,
    CALIBRATION,
    GRAB_EVENT,
    HAND_POSE,
    ROBOT_STATE,
    WIDGET_PARAM,
    TYPE_NAMES,
    BodyPosePayload,
    CalibrationPayload,
    GrabEventPayload,
    HandPosePayload,
    Message,
    RobotStatePayload,
    WidgetParamPayload,
)
from .robot import GoalSpec, MotorCommand, goto_controller, is_at_goal
from .scenario import SCHEMA_VERSION, ScenarioSpec
from .world import RobotObservation, step_world

# A grab stays latched this long past the last anomalous observation.
GRAB_LATCH_S = 0.2
# Observation history depth for manual-grab detection.
GRAB_HISTORY = 8


@dataclass
class _StreamClock:
    """Deterministic cadence: fires on every period boundary crossed."""

    period: float
    next_due: float = 0.0

    def fire(self, t: float) -> bool:
        if t + 1e-9 < self.next_due:
            return False
        while self.next_due <= t + 1e-9:
            self.next_due += self.period
        return True


class TwoRoomSession:
    """Deterministic coupled simulation of the remote and local rooms."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.dt = spec.dt_s
        self.n_ticks = int(round(spec.duration_s / spec.dt_s))
        self.tick = 0

        self.local = spec.rooms["local"].build_world(
            spec.sensor_quantum, spec.report_period
        )
        self.remote = spec.rooms["remote"].build_world(
            spec.sensor_quantum, spec.report_period
        )
        link = spec.link
        self.link_rl = SimulatedLink(
            link.latency_ms, link.jitter_ms, link.loss, link.allow_reorder,
            seed=spec.seed * 2 + 1,
        )
        self.link_lr = SimulatedLink(
            link.latency_ms, link.jitter_ms, link.loss, link.allow_reorder,
            seed=spec.seed * 2 + 2,
        )
        self.replica_local = ReplicaStore()
        self.replica_remote = ReplicaStore()
        self.seq_remote = SequenceCounters()
        self.seq_local = SequenceCounters()
        self.coupler = Coupler(spec.bindings)
        self.widgets = {w.widget_id: w for w in spec.widgets}
        self.calibration = spec.calibration

        self._hand_clock = _StreamClock(1.0 / spec.hand_rate_hz)
        self._body_clock = _StreamClock(1.0 / spec.body_rate_hz)
        self._vo_clock = _StreamClock(1.0 / spec.hand_rate_hz)

        self.vo_poses: dict[int, Pose2D] = {}
        for vo in spec.scripts.virtual_objects:
            x, y, *rest = vo.waypoints.sample(0.0)
            self.vo_poses[vo.object_id] = Pose2D(x, y, rest[0] if rest else 0.0)

        # Live (bridge) injections override scripted streams once present.
        self.injected_hands: dict[int, HandPose] = {}
        self.injected_skeletons: dict[int, BodySkeleton] = {}
        self.injected_vo: dict[int, Pose2D] = {}
        self.injected_remote_robots: dict[int, Pose2D] = {}
        self.pending_triggers: list[tuple[str, int | None]] = []

        self._fired_triggers: set[int] = set()
        self._fired_widget_sets: set[int] = set()
        self._fired_pen_events: set[int] = set()
        self._grab_anchor: dict[int, Pose2D] = {}
        self._obs_history: dict[int, list[RobotObservation]] = {}
        self._last_cmd_speed: dict[int, float] = {}
        self._last_anomaly_t: dict[int, float] = {}
        self._grab_flag: dict[int, bool] = {}
        self._widget_logged: dict[int, dict] = {}
        self._contact_state: dict[int, bool] = {}

        # Live start-latency readout: armed by triggers naming a robot.
        self._latency_watch: dict[int, float] = {}
        self.last_start_latency_s: float | None = None
        self._last_goals: dict[int, GoalSpec] = {}
        self._hands_now: dict[int, HandPose] = {}
        self._skeletons_now: dict[int, BodySkeleton] = {}

        self.records: list[dict] = [
            {
                "kind": "header",
                "schema": SCHEMA_VERSION,
                "scenario": spec.resolved,
            }
        ]

    # ------------------------------------------------------------------
    # helpers

    @property
    def now(self) -> float:
        return self.tick * self.dt

    def _log(self, record: dict) -> None:
        self.records.append(record)

    def _log_msg(self, direction: str, event: str, msg: Message, t: float, extra=None):
        rec = {
            "kind": "msg",
            "t": t,
            "dir": direction,
            "event": event,
            "type": TYPE_NAMES[msg.msg_type],
            "seq": msg.seq,
            "subject": msg.subject_id,
        }
        if extra:
            rec.update(extra)
        self._log(rec)

    def _send(self, direction: str, msg_type: int, payload, t: float) -> None:
        if direction == "rl":
            link, counters = self.link_rl, self.seq_remote
        else:
            link, counters = self.link_lr, self.seq_local
        seq = counters.next_for(msg_type, payload.subject_id)
        msg = Message(msg_type, seq, int(round(t * 1e6)), payload)
        when = link.send(msg, t)
        self._log_msg(direction, "sent" if when is not None else "dropped", msg, t)

    def set_link_params(self, latency_ms=None, jitter_ms=None, loss=None) -> None:
        self.link_rl.set_params(latency_ms, jitter_ms, loss)
        self.link_lr.set_params(latency_ms, jitter_ms, loss)

    def link_params(self) -> dict:
        return {
            "latency_ms": self.link_rl.latency_ms,
            "jitter_ms": self.link_rl.jitter_ms,
            "loss": self.link_rl.loss_rate,
        }

    # ------------------------------------------------------------------
    # scripted/live inputs

    def _scripted_remote_overrides(self, t: float) -> dict[int, Pose2D]:
        overrides: dict[int, Pose2D] = {}
        for path in self.spec.scripts.remote_robot_paths:
            x, y, *rest = path.waypoints.sample(t)
            theta = rest[0] if rest else self.remote.robots[path.robot_id].pose.theta
            overrides[path.robot_id] = Pose2D(x, y, theta)
        overrides.update(self.injected_remote_robots)
        return overrides

    def _current_hands(self, t: float) -> dict[int, HandPose]:
        hands: dict[int, HandPose] = {}
        for script in self.spec.scripts.hands:
            fingers = {}
            for name, wps in script.fingers.items():
                x, y = wps.sample(t)[:2]
                fingers[name] = (x, y)
            grab_state, grabbed = "open", None
            for g in script.grabs:
                if g["t"] <= t + 1e-9:
                    grab_state = g.get("state", "open")
                    grabbed = g.get("object")
            hands[script.hand_id] = HandPose(
                timestamp=t, fingers=fingers, grab_state=grab_state,
                grabbed_object=grabbed,
            )
        hands.update(self.injected_hands)
        return hands

    def _current_skeletons(self, t: float) -> dict[int, BodySkeleton]:
        skeletons: dict[int, BodySkeleton] = {}
        for script in self.spec.scripts.skeletons:
            joints = {
                name: tuple(wps.sample(t)[:2]) for name, wps in script.joints.items()
            }
            skeletons[script.skeleton_id] = BodySkeleton(
                timestamp=t, joints=joints, world_to_miniature_scale=script.scale
            )
        skeletons.update(self.injected_skeletons)
        return skeletons

    def _fire_timed_events(self, t: float) -> None:
        for i, trig in enumerate(self.spec.scripts.triggers):
            if i not in self._fired_triggers and trig.t <= t + 1e-9:
                self._fired_triggers.add(i)
                self._log(
                    {
                        "kind": "event", "t": t, "name": "trigger",
                        "label": trig.label, "robot": trig.robot_id,
                    }
                )
                if trig.robot_id is not None:
                    self._latency_watch[trig.robot_id] = t
        for label, robot_id in self.pending_triggers:
            self._log(
                {"kind": "event", "t": t, "name": "trigger", "label": label, "robot": robot_id}
            )
            if robot_id is not None:
                self._latency_watch[robot_id] = t
        self.pending_triggers.clear()
        for i, ws in enumerate(self.spec.scripts.widget_sets):
            if i not in self._fired_widget_sets and ws.t <= t + 1e-9:
                self._fired_widget_sets.add(i)
                self.widgets[ws.target].target_param = ws.value
                self._log(
                    {
                        "kind": "event", "t": t, "name": "widget_set",
                        "widget": ws.target, "value": ws.value,
                    }
                )
        for i, pe in enumerate(self.spec.scripts.pen_events):
            if i not in self._fired_pen_events and pe.t <= t + 1e-9:
                self._fired_pen_events.add(i)
                for att in self.local.attachments:
                    if att.robot_id == pe.target and att.kind == "pen":
                        att.pen_down = bool(pe.value)
                        if att.pen_down:
                            trace = self.local.pen_traces.setdefault(pe.target, [])
                            trace.append(self.local.robots[pe.target].pose.position)
                self._log(
                    {
                        "kind": "event", "t": t, "name": "pen",
                        "robot": pe.target, "down": bool(pe.value),
                    }
                )

    def _local_grab_overrides(self, t: float) -> dict[int, Pose2D]:
        overrides: dict[int, Pose2D] = {}
        for i, g in enumerate(self.spec.scripts.local_grabs):
            if g.t - 1e-9 <= t < g.t + g.duration_s - 1e-9:
                if i not in self._grab_anchor:
                    pose = self.local.robots[g.robot_id].pose
                    self._grab_anchor[i] = Pose2D(pose.x + g.dx, pose.y + g.dy, pose.theta)
                overrides[g.robot_id] = self._grab_anchor[i]
        return overrides

    # ------------------------------------------------------------------
    # per-tick pipeline

    def _announce_calibration(self, t: float) -> None:
        """Share the stored avatar-mat alignment with the remote peer once."""
        mats = self.spec.rooms["local"].mats
        cal = self.calibration
        self._send(
            "lr",
            CALIBRATION,
            CalibrationPayload(
                mat_id=mats[0].mat_id if mats else 0,
                rotation=cal.rotation,
                dx=cal.dx,
                dy=cal.dy,
                scale=cal.scale,
                created_at_us=0,
            ),
            t,
        )

    def _remote_to_wire(self, t: float) -> None:
        for obs in self.remote.sample_sensors():
            self._send(
                "rl",
                ROBOT_STATE,
                RobotStatePayload(
                    robot_id=obs.robot_id,
                    x=obs.pose.x, y=obs.pose.y, theta=obs.pose.theta,
                ),
                t,
            )
        if self._vo_clock.fire(t) and self.vo_poses:
            for oid, pose in self.vo_poses.items():
                self._send(
                    "rl",
                    ROBOT_STATE,
                    RobotStatePayload(robot_id=oid, x=pose.x, y=pose.y, theta=pose.theta),
                    t,
                )
        if self._hand_clock.fire(t):
            for hid, hand in self._hands_now.items():
                self._send(
                    "rl",
                    HAND_POSE,
                    HandPosePayload(
                        hand_id=hid,
                        fingers={k: v for k, v in hand.fingers.items()},
                        grab_state=hand.grab_state,
                        grabbed_object=hand.grabbed_object or 0,
                    ),
                    t,
                )
        if self._body_clock.fire(t):
            for sid, sk in self._skeletons_now.items():
                self._send(
                    "rl",
                    BODY_POSE,
                    BodyPosePayload(
                        skeleton_id=sid,
                        scale=sk.world_to_miniature_scale,
                        joints=dict(sk.joints),
                    ),
                    t,
                )

    def _deliver(self, t: float) -> None:
        for msg in self.link_rl.poll(t):
            result = self.replica_local.apply(msg)
            self._log_msg("rl", "recv", msg, t, {"result": result})
        for msg in self.link_lr.poll(t):
            result = self.replica_remote.apply(msg)
            self._log_msg("lr", "recv", msg, t, {"result": result})

    def _local_sensing(self, t: float) -> None:
        for obs in self.local.sample_sensors():
            rid = obs.robot_id
            history = self._obs_history.setdefault(rid, [])
            history.append(obs)
            del history[:-GRAB_HISTORY]
            if detect_manual_grab(
                history,
                self._last_cmd_speed.get(rid, 0.0),
                self.local.spec_for(rid).goal_tolerance,
            ):
                self._last_anomaly_t[rid] = t
            grabbed = t - self._last_anomaly_t.get(rid, -math.inf) < GRAB_LATCH_S
            state = self.local.robots[rid]
            if grabbed != self._grab_flag.get(rid, False):
                self._grab_flag[rid] = grabbed
                self._log(
                    {"kind": "event", "t": t, "name": "grab", "robot": rid, "grabbed": grabbed}
                )
                self._send(
                    "lr", GRAB_EVENT, GrabEventPayload(robot_id=rid, grabbed=grabbed), t
                )
            state.grabbed_by_local = grabbed
            self._send(
                "lr",
                ROBOT_STATE,
                RobotStatePayload(
                    robot_id=rid,
                    x=obs.pose.x, y=obs.pose.y, theta=obs.pose.theta,
                    grabbed=state.grabbed_by_local,
                ),
                t,
            )

    def _coupling_inputs(self, t: float) -> CouplingInputs:
        observations = {}
        for subject, msg in self.replica_local.latest(ROBOT_STATE).items():
            p = msg.payload
            observations[subject] = (Pose2D(p.x, p.y, p.theta), msg.timestamp_us / 1e6)
        hands = {}
        for subject, msg in self.replica_local.latest(HAND_POSE).items():
            p = msg.payload
            hands[subject] = HandPose(
                timestamp=msg.timestamp_us / 1e6,
                fingers=dict(p.fingers),
                grab_state=p.grab_state,
                grabbed_object=p.grabbed_object or None,
            )
        skeletons = {}
        for subject, msg in self.replica_local.latest(BODY_POSE).items():
            p = msg.payload
            skeletons[subject] = BodySkeleton(
                timestamp=msg.timestamp_us / 1e6,
                joints=dict(p.joints),
                world_to_miniature_scale=p.scale,
            )
        return CouplingInputs(
            now=t,
            observations=observations,
            hands=hands,
            skeletons=skeletons,
            touch_zones=self.spec.rooms["local"].touch_zones,
            calibration=self.calibration,
        )

    def _widget_goal_candidates(self) -> dict[int, list[tuple[int, GoalSpec]]]:
        candidates: dict[int, list[tuple[int, GoalSpec]]] = {}
        for w in self.widgets.values():
            if w.target_param is None or not w.bound_robot_ids:
                continue
            rid = w.bound_robot_ids[0]
            state = self.local.robots.get(rid)
            if state is None:
                continue
            goal_geom = w.goal_for_target(state.pose)
            if goal_geom is None:
                continue
            point, heading = goal_geom
            goal = GoalSpec(target=point, target_heading=heading)
            candidates.setdefault(rid, []).append((100000 + w.widget_id, goal))
        return candidates

    def _update_widgets(self, t: float) -> None:
        poses = {rid: st.pose for rid, st in self.local.robots.items()}
        for w in self.widgets.values():
            params = w.update_from_poses(poses)
            if not params:
                continue
            if params != self._widget_logged.get(w.widget_id):
                self._widget_logged[w.widget_id] = dict(params)
                self._log(
                    {"kind": "widget", "t": t, "id": w.widget_id, "params": dict(params)}
                )
                values = tuple(params[k] for k in sorted(params))
                self._send(
                    "lr",
                    WIDGET_PARAM,
                    WidgetParamPayload(widget_id=w.widget_id, kind=w.kind, values=values),
                    t,
                )

    def _check_contacts(self, t: float, inputs: CouplingInputs, goals) -> None:
        for b in self.coupler.bindings:
            if b.mode != MODE_HAPTIC_TOUCH or not b.active:
                continue
            hand = inputs.hands.get(b.source_key)
            goal = goals.get(b.target_robot_id)
            state = self.local.robots.get(b.target_robot_id)
            if hand is None or goal is None or state is None or "index" not in hand.fingers:
                continue
            hx, hy = inputs.calibration.apply(hand.fingers["index"])
            in_zone = any(
                math.hypot(hx - z.center[0], hy - z.center[1]) < z.radius
                for z in inputs.touch_zones
            )
            touching = in_zone and is_at_goal(
                state, goal, self.local.spec_for(b.target_robot_id)
            )
            if touching and not self._contact_state.get(b.binding_id, False):
                self._log(
                    {
                        "kind": "event", "t": t, "name": "contact",
                        "robot": b.target_robot_id, "binding": b.binding_id,
                    }
                )
            self._contact_state[b.binding_id] = touching

    def step(self) -> None:
        t = self.now
        if self.tick == 0:
            self._announce_calibration(t)
        self._fire_timed_events(t)
        remote_overrides = self._scripted_remote_overrides(t)
        local_overrides = self._local_grab_overrides(t)
        for vo in self.spec.scripts.virtual_objects:
            x, y, *rest = vo.waypoints.sample(t)
            theta = rest[0] if rest else self.vo_poses[vo.object_id].theta
            self.vo_poses[vo.object_id] = Pose2D(x, y, theta)
        self.vo_poses.update(self.injected_vo)
        self._hands_now = self._current_hands(t)
        self._skeletons_now = self._current_skeletons(t)

        self._remote_to_wire(t)
        self._deliver(t)
        self._local_sensing(t)

        inputs = self._coupling_inputs(t)
        candidates = self.coupler.compute_goals(inputs)
        for rid, extra in self._widget_goal_candidates().items():
            candidates.setdefault(rid, []).extend(extra)
        goals = resolve_conflicts(candidates, self.local.robots)
        self._last_goals = goals

        commands: dict[int, MotorCommand] = {}
        for rid, goal in goals.items():
            if rid in local_overrides:
                continue
            spec = self.local.spec_for(rid)
            cmd = goto_controller(self.local.robots[rid], goal, spec)
            commands[rid] = cmd
            self._last_cmd_speed[rid] = abs(cmd.v)
            if rid in self._latency_watch and not cmd.is_stop:
                self.last_start_latency_s = t - self._latency_watch.pop(rid)
        for rid in self.local.robots:
            if rid not in commands:
                self._last_cmd_speed[rid] = 0.0

        step_world(self.local, commands, self.dt, pose_overrides=local_overrides)
        step_world(self.remote, {}, self.dt, pose_overrides=remote_overrides)

        self._update_widgets(t)
        self._check_contacts(t, inputs, goals)

        record = {
            "kind": "tick",
            "n": self.tick,
            "t": t,
            "cmds": {str(rid): [c.v, c.omega] for rid, c in commands.items()},
            "goals": {
                str(rid): [
                    g.target[0],
                    g.target[1],
                    g.target_heading,
                    g.resolved_tolerance(self.local.spec_for(rid)),
                ]
                for rid, g in goals.items()
            },
            "local": self.local.snapshot(),
            "remote": self.remote.snapshot(),
        }
        if self.vo_poses:
            record["vo"] = {
                str(oid): [p.x, p.y, p.theta] for oid, p in self.vo_poses.items()
            }
        grabbed = [str(rid) for rid, f in self._grab_flag.items() if f]
        if grabbed:
            record["grabbed"] = grabbed
        self._log(record)
        self.tick += 1

    def run(self) -> list[dict]:
        while self.tick < self.n_ticks:
            self.step()
        return self.records


def run_scenario(spec_or_name, overrides: dict | None = None):
    """Run a scenario to completion; returns (log records, RunMetrics)."""
    from .metrics import compute_metrics
    from .scenario import ScenarioSpec, load_scenario, parse_scenario

    if isinstance(spec_or_name, ScenarioSpec):
        spec = spec_or_name
    elif isinstance(spec_or_name, dict):
        spec = parse_scenario(spec_or_name, overrides)
    else:
        spec = load_scenario(spec_or_name, overrides)
    session = TwoRoomSession(spec)
    records = session.run()
    return records, compute_metrics(records)
