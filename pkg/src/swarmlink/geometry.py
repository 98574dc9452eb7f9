"""Planar geometry: poses, rigid transforms, mat frames, and calibration.

All angles are degrees (counter-clockwise, 0 = +x axis) and are normalized
to ``[0, 360)`` wherever they describe an orientation.  Lengths are
centimeters.  Internal trigonometry converts to radians on the fly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import MatMismatch, NonFiniteInput

Point = tuple[float, float]

# Anchor/mat separations beyond this are treated as operator error.
CALIBRATION_SANITY_RANGE_CM = 1000.0


def normalize_angle(degrees: float) -> float:
    """Map an angle to the canonical ``[0, 360)`` range."""
    r = degrees % 360.0
    # Float modulo of a tiny negative rounds up to exactly 360.0.
    return r if r < 360.0 else 0.0


def wrap_angle(degrees: float) -> float:
    """Map an angle difference to ``[-180, 180)`` (shortest arc)."""
    r = (degrees + 180.0) % 360.0
    if r >= 360.0:
        r = 0.0
    return r - 180.0


def _require_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise NonFiniteInput(f"non-finite value {v!r}")


@dataclass(frozen=True)
class Pose2D:
    """Planar pose: position in cm, heading in degrees normalized to [0, 360)."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        _require_finite(self.x, self.y, self.theta)
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @property
    def position(self) -> Point:
        return (self.x, self.y)

    def distance_to(self, point: Point) -> float:
        return math.hypot(point[0] - self.x, point[1] - self.y)


@dataclass(frozen=True)
class Transform2D:
    """Rigid planar transform with optional uniform scale.

    Applies as ``p' = translation + scale * R(rotation) @ p``.  Non-unit
    scale is only used by miniature-body and widget mappings; everything
    else composes rigid transforms (scale 1).
    """

    rotation: float = 0.0
    dx: float = 0.0
    dy: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        _require_finite(self.rotation, self.dx, self.dy, self.scale)
        if self.scale <= 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "rotation", normalize_angle(self.rotation))

    @property
    def translation(self) -> Point:
        return (self.dx, self.dy)

    def apply(self, point: Point) -> Point:
        rad = math.radians(self.rotation)
        c, s = math.cos(rad), math.sin(rad)
        x, y = point
        return (
            self.dx + self.scale * (c * x - s * y),
            self.dy + self.scale * (s * x + c * y),
        )

    def apply_pose(self, pose: Pose2D) -> Pose2D:
        x, y = self.apply((pose.x, pose.y))
        return Pose2D(x, y, pose.theta + self.rotation)

    def compose(self, other: Transform2D) -> Transform2D:
        """Transform equal to applying ``other`` first, then ``self``."""
        tx, ty = self.apply((other.dx, other.dy))
        return Transform2D(
            rotation=self.rotation + other.rotation,
            dx=tx,
            dy=ty,
            scale=self.scale * other.scale,
        )

    def invert(self) -> Transform2D:
        inv_scale = 1.0 / self.scale
        rad = math.radians(-self.rotation)
        c, s = math.cos(rad), math.sin(rad)
        return Transform2D(
            rotation=-self.rotation,
            dx=-inv_scale * (c * self.dx - s * self.dy),
            dy=-inv_scale * (s * self.dx + c * self.dy),
            scale=inv_scale,
        )

    def to_dict(self) -> dict:
        return {
            "rotation_deg": self.rotation,
            "dx_cm": self.dx,
            "dy_cm": self.dy,
            "scale": self.scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Transform2D:
        return cls(
            rotation=d.get("rotation_deg", 0.0),
            dx=d.get("dx_cm", 0.0),
            dy=d.get("dy_cm", 0.0),
            scale=d.get("scale", 1.0),
        )


IDENTITY = Transform2D()


def identity() -> Transform2D:
    return IDENTITY


def compose(a: Transform2D, b: Transform2D) -> Transform2D:
    """Compose two transforms: ``compose(a, b).apply(p) == a.apply(b.apply(p))``."""
    return a.compose(b)


def apply(t: Transform2D, point: Point) -> Point:
    return t.apply(point)


def pose_frame(pose: Pose2D) -> Transform2D:
    """Transform placing a local frame at ``pose`` (origin at its position,
    x-axis along its heading)."""
    return Transform2D(rotation=pose.theta, dx=pose.x, dy=pose.y)


@dataclass(frozen=True)
class MatFrame:
    """One tracking mat: a ``width x height`` rectangle placed in the world.

    ``origin_in_world`` maps mat-local coordinates (origin at one corner,
    x right, y up) into the shared surface frame.  ``tiling_offset`` marks
    a mat's (col, row) position when several mats are aligned into a
    larger workspace.
    """

    mat_id: int
    width: float = 55.0
    height: float = 55.0
    origin_in_world: Transform2D = field(default_factory=Transform2D)
    orientation_mode: str = "horizontal"  # "horizontal" | "vertical"
    tiling_offset: tuple[int, int] | None = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("mat extent components must be positive")
        if self.orientation_mode not in ("horizontal", "vertical"):
            raise ValueError(f"bad orientation_mode {self.orientation_mode!r}")

    def world_to_mat(self, point: Point) -> Point:
        return self.origin_in_world.invert().apply(point)

    def mat_to_world(self, point: Point) -> Point:
        return self.origin_in_world.apply(point)

    def contains(self, point: Point, margin: float = 1e-9) -> bool:
        x, y = self.world_to_mat(point)
        return -margin <= x <= self.width + margin and -margin <= y <= self.height + margin

    def clamp(self, point: Point) -> Point:
        """Nearest point of the mat rectangle, in world coordinates."""
        x, y = self.world_to_mat(point)
        cx = min(max(x, 0.0), self.width)
        cy = min(max(y, 0.0), self.height)
        return self.mat_to_world((cx, cy))

    def corners(self) -> list[Point]:
        local = [(0.0, 0.0), (self.width, 0.0), (self.width, self.height), (0.0, self.height)]
        return [self.mat_to_world(p) for p in local]

    def tiled(self, col: int, row: int) -> MatFrame:
        """A copy of this mat shifted by whole-mat steps in its own frame."""
        shift = Transform2D(dx=col * self.width, dy=row * self.height)
        return MatFrame(
            mat_id=self.mat_id,
            width=self.width,
            height=self.height,
            origin_in_world=self.origin_in_world.compose(shift),
            orientation_mode=self.orientation_mode,
            tiling_offset=(col, row),
        )


def mats_overlap(a: MatFrame, b: MatFrame) -> bool:
    """True when the interiors of two mat rectangles intersect (SAT test)."""
    ca, cb = a.corners(), b.corners()

    def axes(corners):
        out = []
        for i in range(2):  # two edge directions per rectangle
            ex = corners[i + 1][0] - corners[i][0]
            ey = corners[i + 1][1] - corners[i][1]
            out.append((-ey, ex))
        return out

    for ax, ay in axes(ca) + axes(cb):
        pa = [ax * x + ay * y for x, y in ca]
        pb = [ax * x + ay * y for x, y in cb]
        if max(pa) <= min(pb) + 1e-9 or max(pb) <= min(pa) + 1e-9:
            return False
    return True


@dataclass(frozen=True)
class CalibrationRecord:
    """Persisted alignment of the remote avatar frame onto one mat.

    ``avatar_to_mat`` maps avatar-space (shared world) coordinates into the
    mat-local frame; it is recomputed once manually and can then be reused
    across sessions, optionally re-anchored from a printed marker pose.
    """

    avatar_to_mat: Transform2D
    created_at: float
    mat_id: int

    def to_dict(self) -> dict:
        return {
            "mat_id": self.mat_id,
            "created_at": self.created_at,
            "avatar_to_mat": self.avatar_to_mat.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> CalibrationRecord:
        return cls(
            avatar_to_mat=Transform2D.from_dict(d["avatar_to_mat"]),
            created_at=d["created_at"],
            mat_id=d["mat_id"],
        )


def calibrate_manual(
    avatar_anchor_in_world: Pose2D, mat: MatFrame, created_at: float = 0.0
) -> CalibrationRecord:
    """Build the record aligning the avatar frame with ``mat``.

    The resulting ``avatar_to_mat`` maps world coordinates into mat-local
    ones, so the avatar anchor lands at its mat-local pose (the mat origin
    when the anchor coincides with it).
    """
    ox, oy = mat.mat_to_world((0.0, 0.0))
    if math.hypot(avatar_anchor_in_world.x - ox, avatar_anchor_in_world.y - oy) > CALIBRATION_SANITY_RANGE_CM:
        raise ValueError("avatar anchor is implausibly far from the mat origin")
    return CalibrationRecord(
        avatar_to_mat=mat.origin_in_world.invert(),
        created_at=created_at,
        mat_id=mat.mat_id,
    )


def relocalize_from_anchor(
    anchor_pose_on_mat: Pose2D, record: CalibrationRecord, mat_id: int
) -> Transform2D:
    """Recover the avatar placement from a marker observed at a new pose.

    The marker's reference pose is the mat-local origin; moving the marker
    rigidly moves the whole calibrated layout with it.
    """
    if mat_id != record.mat_id:
        raise MatMismatch(f"record is for mat {record.mat_id}, anchor seen on mat {mat_id}")
    return compose(pose_frame(anchor_pose_on_mat), record.avatar_to_mat)
