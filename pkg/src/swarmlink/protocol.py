"""Binary wire protocol for the room-to-room datagram stream.

Layout (all little-endian):

    header   2s  magic "HB"
             B   version (currently 1)
             B   msg_type
             I   seq        per (sender, msg_type, subject) stream, from 1
             Q   timestamp_us   sender clock
    payload  type-specific, fixed point:
             positions/lengths  i32 in 0.01 cm units
             angles             i32 in millidegrees
             speeds             i32 in 0.01 cm/s (millideg/s for angular)
             scales/params      i64 in millionths

A message round-trips bit-exactly when its values sit on the fixed-point
grid; the grid is finer than the sensor quantization, so sensor-derived
values always do.  ``decode`` never raises anything but ``CodecError``
subclasses, whatever bytes it is fed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .errors import BadMagic, TruncatedPayload, UnknownType, VersionMismatch

MAGIC = b"HB"
VERSION = 1
HEADER = struct.Struct("<2sBBIQ")

ROBOT_STATE = 1
GOAL_CMD = 2
HAND_POSE = 3
BODY_POSE = 4
GRAB_EVENT = 5
WIDGET_PARAM = 6
CALIBRATION = 7
BIND_CTL = 8

TYPE_NAMES = {
    ROBOT_STATE: "robot_state",
    GOAL_CMD: "goal_cmd",
    HAND_POSE: "hand_pose",
    BODY_POSE: "body_pose",
    GRAB_EVENT: "grab_event",
    WIDGET_PARAM: "widget_param",
    CALIBRATION: "calibration",
    BIND_CTL: "bind_ctl",
}

FINGER_BITS = {"thumb": 1, "index": 2, "pinky": 4}
FINGER_ORDER = ("thumb", "index", "pinky")

JOINT_IDS = {
    "pelvis": 0,
    "spine": 1,
    "neck": 2,
    "head": 3,
    "left_hand": 4,
    "right_hand": 5,
    "left_foot": 6,
    "right_foot": 7,
}
JOINT_NAMES = {v: k for k, v in JOINT_IDS.items()}

BINDING_MODES = {
    "mirror": 1,
    "virtual_grasp": 2,
    "finger_follow": 3,
    "miniature_body": 4,
    "haptic_touch": 5,
}
BINDING_MODE_NAMES = {v: k for k, v in BINDING_MODES.items()}

WIDGET_KIND_IDS = {"control_points": 1, "slider": 2, "knob": 3, "button": 4}
WIDGET_KIND_NAMES = {v: k for k, v in WIDGET_KIND_IDS.items()}

_I32_MIN, _I32_MAX = -(2**31), 2**31 - 1
_I64_MIN, _I64_MAX = -(2**63), 2**63 - 1


def _fx(value: float, unit: float, lo: int = _I32_MIN, hi: int = _I32_MAX) -> int:
    scaled = round(value / unit)
    if not (lo <= scaled <= hi):
        raise ValueError(f"value {value} out of fixed-point range")
    return scaled


def cm_to_wire(v: float) -> int:
    return _fx(v, 0.01)


def deg_to_wire(v: float) -> int:
    return _fx(v, 0.001)


def micro_to_wire(v: float) -> int:
    return _fx(v, 1e-6, _I64_MIN, _I64_MAX)


@dataclass(frozen=True)
class RobotStatePayload:
    robot_id: int
    x: float
    y: float
    theta: float
    v: float = 0.0
    omega: float = 0.0
    grabbed: bool = False

    @property
    def subject_id(self) -> int:
        return self.robot_id


@dataclass(frozen=True)
class GoalCmdPayload:
    robot_id: int
    x: float
    y: float
    target_heading: float | None = None
    tolerance: float = 1.1
    priority: int = 0

    @property
    def subject_id(self) -> int:
        return self.robot_id


@dataclass(frozen=True)
class HandPosePayload:
    hand_id: int
    fingers: dict[str, tuple[float, float]] = field(default_factory=dict)
    grab_state: str = "open"
    grabbed_object: int = 0

    @property
    def subject_id(self) -> int:
        return self.hand_id


@dataclass(frozen=True)
class BodyPosePayload:
    skeleton_id: int
    scale: float
    joints: dict[str, tuple[float, float]] = field(default_factory=dict)

    @property
    def subject_id(self) -> int:
        return self.skeleton_id


@dataclass(frozen=True)
class GrabEventPayload:
    robot_id: int
    grabbed: bool
    by_local: bool = True

    @property
    def subject_id(self) -> int:
        return self.robot_id


@dataclass(frozen=True)
class WidgetParamPayload:
    widget_id: int
    kind: str
    values: tuple[float, ...] = ()

    @property
    def subject_id(self) -> int:
        return self.widget_id


@dataclass(frozen=True)
class CalibrationPayload:
    mat_id: int
    rotation: float
    dx: float
    dy: float
    scale: float
    created_at_us: int = 0

    @property
    def subject_id(self) -> int:
        return self.mat_id


@dataclass(frozen=True)
class BindCtlPayload:
    binding_id: int
    mode: str
    source_id: int
    target_robot_id: int
    active: bool = True
    tolerance: float | None = None
    priority: int = 0

    @property
    def subject_id(self) -> int:
        return self.binding_id


Payload = (
    RobotStatePayload
    | GoalCmdPayload
    | HandPosePayload
    | BodyPosePayload
    | GrabEventPayload
    | WidgetParamPayload
    | CalibrationPayload
    | BindCtlPayload
)

PAYLOAD_TYPES = {
    ROBOT_STATE: RobotStatePayload,
    GOAL_CMD: GoalCmdPayload,
    HAND_POSE: HandPosePayload,
    BODY_POSE: BodyPosePayload,
    GRAB_EVENT: GrabEventPayload,
    WIDGET_PARAM: WidgetParamPayload,
    CALIBRATION: CalibrationPayload,
    BIND_CTL: BindCtlPayload,
}


@dataclass(frozen=True)
class Message:
    msg_type: int
    seq: int
    timestamp_us: int
    payload: Payload

    @property
    def subject_id(self) -> int:
        return self.payload.subject_id

    @property
    def key(self) -> tuple[int, int]:
        """Replication key: one latest-wins slot per (type, subject)."""
        return (self.msg_type, self.subject_id)


_STRUCT_CACHE: dict[str, struct.Struct] = {}


def _struct(fmt: str) -> struct.Struct:
    s = _STRUCT_CACHE.get(fmt)
    if s is None:
        s = _STRUCT_CACHE[fmt] = struct.Struct("<" + fmt)
    return s


class _Reader:
    """Bounds-checked little-endian cursor over a payload buffer."""

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, fmt: str):
        s = _struct(fmt)
        if self.pos + s.size > len(self.buf):
            raise TruncatedPayload(
                f"need {s.size} more bytes at offset {self.pos}, have {len(self.buf) - self.pos}"
            )
        out = s.unpack_from(self.buf, self.pos)
        self.pos += s.size
        return out

    def finish(self) -> None:
        if self.pos != len(self.buf):
            raise TruncatedPayload(
                f"{len(self.buf) - self.pos} trailing bytes after payload"
            )


def _encode_payload(msg_type: int, p: Payload) -> bytes:
    if msg_type == ROBOT_STATE:
        flags = 1 if p.grabbed else 0
        return struct.pack(
            "<IiiiiiB",
            p.robot_id,
            cm_to_wire(p.x),
            cm_to_wire(p.y),
            deg_to_wire(p.theta),
            cm_to_wire(p.v),
            deg_to_wire(p.omega),
            flags,
        )
    if msg_type == GOAL_CMD:
        has_heading = p.target_heading is not None
        return struct.pack(
            "<IiiBiIi",
            p.robot_id,
            cm_to_wire(p.x),
            cm_to_wire(p.y),
            1 if has_heading else 0,
            deg_to_wire(p.target_heading) if has_heading else 0,
            _fx(p.tolerance, 0.01, 0, 2**32 - 1),
            p.priority,
        )
    if msg_type == HAND_POSE:
        mask = 0
        coords = b""
        for name in FINGER_ORDER:
            if name in p.fingers:
                mask |= FINGER_BITS[name]
                x, y = p.fingers[name]
                coords += struct.pack("<ii", cm_to_wire(x), cm_to_wire(y))
        pinching = p.grab_state == "pinching"
        return (
            struct.pack("<IB", p.hand_id, mask)
            + coords
            + struct.pack("<BI", 1 if pinching else 0, p.grabbed_object)
        )
    if msg_type == BODY_POSE:
        out = struct.pack("<IqB", p.skeleton_id, micro_to_wire(p.scale), len(p.joints))
        for name in sorted(p.joints, key=lambda n: JOINT_IDS[n]):
            x, y = p.joints[name]
            out += struct.pack("<Bii", JOINT_IDS[name], cm_to_wire(x), cm_to_wire(y))
        return out
    if msg_type == GRAB_EVENT:
        return struct.pack("<IBB", p.robot_id, 1 if p.grabbed else 0, 1 if p.by_local else 0)
    if msg_type == WIDGET_PARAM:
        out = struct.pack(
            "<IBB", p.widget_id, WIDGET_KIND_IDS[p.kind], len(p.values)
        )
        for v in p.values:
            out += struct.pack("<q", micro_to_wire(v))
        return out
    if msg_type == CALIBRATION:
        return struct.pack(
            "<IiiiqQ",
            p.mat_id,
            deg_to_wire(p.rotation),
            cm_to_wire(p.dx),
            cm_to_wire(p.dy),
            micro_to_wire(p.scale),
            p.created_at_us,
        )
    if msg_type == BIND_CTL:
        has_tol = p.tolerance is not None
        return struct.pack(
            "<IBIIBBIi",
            p.binding_id,
            BINDING_MODES[p.mode],
            p.source_id,
            p.target_robot_id,
            1 if p.active else 0,
            1 if has_tol else 0,
            _fx(p.tolerance, 0.01, 0, 2**32 - 1) if has_tol else 0,
            p.priority,
        )
    raise UnknownType(f"cannot encode msg_type {msg_type}")


def _decode_payload(msg_type: int, buf: bytes) -> Payload:
    r = _Reader(buf)
    if msg_type == ROBOT_STATE:
        rid, x, y, theta, v, omega, flags = r.take("IiiiiiB")
        r.finish()
        if flags > 1:
            raise TruncatedPayload(f"bad robot-state flags {flags}")
        return RobotStatePayload(
            rid, x / 100.0, y / 100.0, theta / 1000.0, v / 100.0, omega / 1000.0, flags == 1
        )
    if msg_type == GOAL_CMD:
        rid, x, y, has_heading, heading, tol, priority = r.take("IiiBiIi")
        r.finish()
        if has_heading > 1:
            raise TruncatedPayload(f"bad heading flag {has_heading}")
        return GoalCmdPayload(
            rid,
            x / 100.0,
            y / 100.0,
            heading / 1000.0 if has_heading else None,
            tol / 100.0,
            priority,
        )
    if msg_type == HAND_POSE:
        hand_id, mask = r.take("IB")
        if mask > 7:
            raise TruncatedPayload(f"bad finger mask {mask}")
        fingers = {}
        for name in FINGER_ORDER:
            if mask & FINGER_BITS[name]:
                x, y = r.take("ii")
                fingers[name] = (x / 100.0, y / 100.0)
        pinching, obj = r.take("BI")
        r.finish()
        if pinching > 1:
            raise TruncatedPayload(f"bad grab flag {pinching}")
        return HandPosePayload(
            hand_id, fingers, "pinching" if pinching else "open", obj
        )
    if msg_type == BODY_POSE:
        skel_id, scale, count = r.take("IqB")
        if count > len(JOINT_IDS):
            raise TruncatedPayload(f"joint count {count} exceeds table")
        joints = {}
        last_jid = -1
        for _ in range(count):
            jid, x, y = r.take("Bii")
            if jid not in JOINT_NAMES or jid <= last_jid:
                raise TruncatedPayload(f"bad joint id {jid}")
            last_jid = jid
            joints[JOINT_NAMES[jid]] = (x / 100.0, y / 100.0)
        r.finish()
        if scale <= 0:
            raise TruncatedPayload(f"non-positive scale {scale}")
        return BodyPosePayload(skel_id, scale / 1e6, joints)
    if msg_type == GRAB_EVENT:
        rid, grabbed, by_local = r.take("IBB")
        r.finish()
        if grabbed > 1 or by_local > 1:
            raise TruncatedPayload("bad grab-event flags")
        return GrabEventPayload(rid, grabbed == 1, by_local == 1)
    if msg_type == WIDGET_PARAM:
        wid, kind_id, count = r.take("IBB")
        if kind_id not in WIDGET_KIND_NAMES:
            raise TruncatedPayload(f"bad widget kind {kind_id}")
        if count > 16:
            raise TruncatedPayload(f"widget value count {count} too large")
        values = tuple(r.take("q")[0] / 1e6 for _ in range(count))
        r.finish()
        return WidgetParamPayload(wid, WIDGET_KIND_NAMES[kind_id], values)
    if msg_type == CALIBRATION:
        mat_id, rotation, dx, dy, scale, created = r.take("IiiiqQ")
        r.finish()
        if scale <= 0:
            raise TruncatedPayload(f"non-positive scale {scale}")
        return CalibrationPayload(
            mat_id, rotation / 1000.0, dx / 100.0, dy / 100.0, scale / 1e6, created
        )
    if msg_type == BIND_CTL:
        bid, mode_id, source_id, target, active, has_tol, tol, priority = r.take(
            "IBIIBBIi"
        )
        r.finish()
        if mode_id not in BINDING_MODE_NAMES:
            raise TruncatedPayload(f"bad binding mode {mode_id}")
        if active > 1 or has_tol > 1:
            raise TruncatedPayload("bad bind-ctl flags")
        return BindCtlPayload(
            bid,
            BINDING_MODE_NAMES[mode_id],
            source_id,
            target,
            active == 1,
            tol / 100.0 if has_tol else None,
            priority,
        )
    raise UnknownType(f"unknown msg_type {msg_type}")


def encode(m: Message) -> bytes:
    """Serialize a message; raises ValueError on out-of-range field values."""
    if not (0 <= m.seq <= 2**32 - 1):
        raise ValueError(f"seq {m.seq} out of range")
    if not (0 <= m.timestamp_us <= 2**64 - 1):
        raise ValueError(f"timestamp_us {m.timestamp_us} out of range")
    if m.msg_type not in PAYLOAD_TYPES:
        raise UnknownType(f"unknown msg_type {m.msg_type}")
    if not isinstance(m.payload, PAYLOAD_TYPES[m.msg_type]):
        raise ValueError(
            f"payload {type(m.payload).__name__} does not match msg_type {m.msg_type}"
        )
    payload = _encode_payload(m.msg_type, m.payload)
    return HEADER.pack(MAGIC, VERSION, m.msg_type, m.seq, m.timestamp_us) + payload


def decode(buf: bytes) -> Message:
    """Parse a datagram; total over arbitrary bytes (only CodecError escapes)."""
    if len(buf) < 2:
        raise TruncatedPayload(f"buffer of {len(buf)} bytes is shorter than the magic")
    if buf[:2] != MAGIC:
        raise BadMagic(f"bad magic {buf[:2]!r}")
    if len(buf) < HEADER.size:
        raise TruncatedPayload(
            f"buffer of {len(buf)} bytes is shorter than the {HEADER.size}-byte header"
        )
    _, version, msg_type, seq, timestamp_us = HEADER.unpack_from(buf, 0)
    if version != VERSION:
        raise VersionMismatch(f"unsupported version {version}")
    if msg_type not in PAYLOAD_TYPES:
        raise UnknownType(f"unknown msg_type {msg_type}")
    payload = _decode_payload(msg_type, buf[HEADER.size :])
    return Message(msg_type, seq, timestamp_us, payload)
