"""Live mode: real UDP datagrams between two peer processes.

Each peer runs its own wall-clock-paced loop and exchanges the same binary
message set used by the simulated link.  The replication contract is
identical: latest-wins per (type, subject), no duplication, loss healed by
the next sample.  One peer takes the remote role (scripted inputs), the
other the local role (bindings and robot control).
"""

from __future__ import annotations

import socket
import time

from .coupling import (
    BodySkeleton,
    Coupler,
    CouplingInputs,
    HandPose,
    apply_bind_ctl,
    resolve_conflicts,
)
from .errors import CodecError
from .geometry import Pose2D
from .net import ReplicaStore, SequenceCounters
from .protocol import (
    BIND_CTL,
    BODY_POSE,
    HAND_POSE,
    ROBOT_STATE,
    BodyPosePayload,
    HandPosePayload,
    Message,
    RobotStatePayload,
    decode,
    encode,
)
from .robot import goto_controller
from .scenario import ScenarioSpec
from .world import step_world


class UdpPeer:
    """Non-blocking datagram endpoint speaking the binary codec."""

    def __init__(self, listen_port: int, peer_host: str, peer_port: int):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.setblocking(False)
        self.sock.bind(("127.0.0.1", listen_port))
        self.peer = (peer_host, peer_port)
        self.sent = 0
        self.received = 0
        self.decode_errors = 0

    def send(self, message: Message) -> None:
        self.sock.sendto(encode(message), self.peer)
        self.sent += 1

    def poll(self) -> list[Message]:
        out = []
        while True:
            try:
                data, _ = self.sock.recvfrom(65535)
            except BlockingIOError:
                return out
            except OSError:
                return out
            try:
                out.append(decode(data))
                self.received += 1
            except CodecError:
                self.decode_errors += 1

    def close(self) -> None:
        self.sock.close()


def _pace(next_due: float) -> float:
    delay = next_due - time.monotonic()
    if delay > 0:
        time.sleep(delay)
    return next_due


def run_live(
    spec: ScenarioSpec,
    role: str,
    listen_port: int,
    peer_host: str,
    peer_port: int,
    duration_s: float | None = None,
) -> dict:
    """Run one peer of a live session until the scenario duration elapses.

    Returns transport stats and final robot poses for inspection.
    """
    if role not in ("remote", "local"):
        raise ValueError("role must be 'remote' or 'local'")
    peer = UdpPeer(listen_port, peer_host, peer_port)
    duration = duration_s if duration_s is not None else spec.duration_s
    dt = spec.dt_s
    try:
        if role == "remote":
            stats = _run_remote(spec, peer, duration, dt)
        else:
            stats = _run_local(spec, peer, duration, dt)
    finally:
        peer.close()
    stats.update({"sent": peer.sent, "received": peer.received, "decode_errors": peer.decode_errors})
    return stats


def _run_remote(spec: ScenarioSpec, peer: UdpPeer, duration: float, dt: float) -> dict:
    world = spec.rooms["remote"].build_world(spec.sensor_quantum, spec.report_period)
    counters = SequenceCounters()
    replica = ReplicaStore()
    hand_period = 1.0 / spec.hand_rate_hz
    body_period = 1.0 / spec.body_rate_hz
    hand_due = body_due = 0.0
    start = time.monotonic()
    next_tick = start
    t = 0.0
    while t < duration:
        next_tick = _pace(next_tick + dt)
        t = time.monotonic() - start
        overrides = {}
        for path in spec.scripts.remote_robot_paths:
            x, y, *rest = path.waypoints.sample(t)
            theta = rest[0] if rest else world.robots[path.robot_id].pose.theta
            overrides[path.robot_id] = Pose2D(x, y, theta)
        step_world(world, {}, dt, pose_overrides=overrides)
        for obs in world.sample_sensors():
            seq = counters.next_for(ROBOT_STATE, obs.robot_id)
            peer.send(
                Message(
                    ROBOT_STATE, seq, int(t * 1e6),
                    RobotStatePayload(obs.robot_id, obs.pose.x, obs.pose.y, obs.pose.theta),
                )
            )
        if t >= hand_due:
            hand_due += hand_period
            for script in spec.scripts.hands:
                fingers = {
                    name: tuple(w.sample(t)[:2]) for name, w in script.fingers.items()
                }
                seq = counters.next_for(HAND_POSE, script.hand_id)
                peer.send(
                    Message(
                        HAND_POSE, seq, int(t * 1e6),
                        HandPosePayload(script.hand_id, fingers),
                    )
                )
            for vo in spec.scripts.virtual_objects:
                x, y, *rest = vo.waypoints.sample(t)
                seq = counters.next_for(ROBOT_STATE, vo.object_id)
                peer.send(
                    Message(
                        ROBOT_STATE, seq, int(t * 1e6),
                        RobotStatePayload(vo.object_id, x, y, rest[0] if rest else 0.0),
                    )
                )
        if t >= body_due:
            body_due += body_period
            for script in spec.scripts.skeletons:
                joints = {n: tuple(w.sample(t)[:2]) for n, w in script.joints.items()}
                seq = counters.next_for(BODY_POSE, script.skeleton_id)
                peer.send(
                    Message(
                        BODY_POSE, seq, int(t * 1e6),
                        BodyPosePayload(script.skeleton_id, script.scale, joints),
                    )
                )
        for msg in peer.poll():
            replica.apply(msg)
    return {"role": "remote", "replica_entries": len(replica)}


def _run_local(spec: ScenarioSpec, peer: UdpPeer, duration: float, dt: float) -> dict:
    world = spec.rooms["local"].build_world(spec.sensor_quantum, spec.report_period)
    coupler = Coupler(spec.bindings)
    replica = ReplicaStore()
    counters = SequenceCounters()
    start = time.monotonic()
    next_tick = start
    t = 0.0
    while t < duration:
        next_tick = _pace(next_tick + dt)
        t = time.monotonic() - start
        for msg in peer.poll():
            if msg.msg_type == BIND_CTL:
                apply_bind_ctl(coupler, msg.payload)
            else:
                replica.apply(msg)
        observations = {}
        for subject, msg in replica.latest(ROBOT_STATE).items():
            p = msg.payload
            observations[subject] = (Pose2D(p.x, p.y, p.theta), msg.timestamp_us / 1e6)
        hands = {
            s: HandPose(m.timestamp_us / 1e6, dict(m.payload.fingers),
                        m.payload.grab_state, m.payload.grabbed_object or None)
            for s, m in replica.latest(HAND_POSE).items()
        }
        skeletons = {
            s: BodySkeleton(m.timestamp_us / 1e6, dict(m.payload.joints), m.payload.scale)
            for s, m in replica.latest(BODY_POSE).items()
        }
        inputs = CouplingInputs(
            now=t,
            observations=observations,
            hands=hands,
            skeletons=skeletons,
            touch_zones=spec.rooms["local"].touch_zones,
            calibration=spec.calibration,
        )
        goals = resolve_conflicts(coupler.compute_goals(inputs), world.robots)
        commands = {
            rid: goto_controller(world.robots[rid], goal, world.spec_for(rid))
            for rid, goal in goals.items()
        }
        step_world(world, commands, dt)
        for obs in world.sample_sensors():
            seq = counters.next_for(ROBOT_STATE, obs.robot_id)
            peer.send(
                Message(
                    ROBOT_STATE, seq, int(t * 1e6),
                    RobotStatePayload(obs.robot_id, obs.pose.x, obs.pose.y, obs.pose.theta),
                )
            )
    return {
        "role": "local",
        "replica_entries": len(replica),
        "final_poses": {
            rid: (s.pose.x, s.pose.y, s.pose.theta) for rid, s in world.robots.items()
        },
    }
