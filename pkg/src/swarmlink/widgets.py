"""Tangible UI widgets: bidirectional robot-pose <-> parameter mappings.

Robots stand in for UI elements: two of them pin the corners of a virtual
image (translation + uniform scale), one slides along a track segment, one
turns in place as a knob, one presses a proximity button.  Every mapping
runs both ways: poses produce parameters, and parameter targets produce
goal poses for the bound robots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DegenerateAnchors
from .geometry import Point, Pose2D, normalize_angle

WIDGET_KINDS = ("control_points", "slider", "knob", "button")

BUTTON_RELEASE_HYSTERESIS_CM = 0.5
# y-extent may disagree with the x-driven scale by this much before the
# aspect flag is raised (x still wins).
ASPECT_TOLERANCE = 0.10


@dataclass(frozen=True)
class ImageState:
    """Axis-aligned placement of a virtual picture: translation + uniform scale."""

    translation: Point
    scale: float
    aspect_violation: bool = False


def image_state_from_anchors(
    ul: Point, br: Point, base_size: tuple[float, float]
) -> ImageState:
    """Image placement from its upper-left and bottom-right anchor robots.

    Image-space convention: +y runs downward, so on the mat the "upper left"
    anchor is the corner with the smaller x and y.  Scale is driven by the
    x extent; a y extent disagreeing by more than 10% flags the result.
    """
    w = br[0] - ul[0]
    h = br[1] - ul[1]
    if w <= 0.0 or h <= 0.0:
        raise DegenerateAnchors(f"anchor extent must be positive, got ({w}, {h})")
    base_w, base_h = base_size
    scale = w / base_w
    y_scale = h / base_h
    violation = abs(y_scale - scale) > ASPECT_TOLERANCE * scale
    return ImageState(translation=ul, scale=scale, aspect_violation=violation)


def anchors_from_image_state(
    translation: Point, scale: float, base_size: tuple[float, float]
) -> tuple[Point, Point]:
    """Exact inverse of image_state_from_anchors (round trip is identity)."""
    if scale <= 0.0:
        raise ValueError("scale must be positive")
    ul = translation
    br = (translation[0] + scale * base_size[0], translation[1] + scale * base_size[1])
    return ul, br


def slider_param(pose: Pose2D, track: tuple[Point, Point]) -> float:
    """Normalized position of the robot projected onto the track segment."""
    (ax, ay), (bx, by) = track
    ex, ey = bx - ax, by - ay
    length_sq = ex * ex + ey * ey
    if length_sq <= 0.0:
        raise ValueError("track length must be positive")
    t = ((pose.x - ax) * ex + (pose.y - ay) * ey) / length_sq
    return min(max(t, 0.0), 1.0)


def slider_goal(track: tuple[Point, Point], param: float) -> Point:
    """On-track point for a parameter, the goal sent to the slider robot."""
    p = min(max(param, 0.0), 1.0)
    (ax, ay), (bx, by) = track
    return (ax + p * (bx - ax), ay + p * (by - ay))


def knob_param(
    heading: float,
    angle_range: tuple[float, float],
    param_range: tuple[float, float] = (0.0, 1.0),
) -> float:
    """Map a robot heading into a parameter over the knob's angular range.

    The heading offset from the range start is taken modulo a full turn;
    headings outside the range clamp to whichever end is angularly closer.
    """
    theta0, theta1 = angle_range
    span = theta1 - theta0
    if span == 0.0:
        raise ValueError("knob angle range must be non-degenerate")
    p0, p1 = param_range
    if span < 0.0:
        # Clockwise knob: measure the offset the other way round.
        offset = normalize_angle(theta0 - heading)
        span = -span
    else:
        offset = normalize_angle(heading - theta0)
    arc = min(span, 360.0)
    if span >= 360.0 or offset <= arc:
        frac = min(offset / span, 1.0)
        return p0 + (p1 - p0) * frac
    # Outside the arc: clamp to the angularly closer end (start wins ties).
    past_end = offset - arc
    before_start = 360.0 - offset
    return p1 if past_end < before_start else p0


def knob_goal(
    angle_range: tuple[float, float],
    param: float,
    param_range: tuple[float, float] = (0.0, 1.0),
) -> float:
    """Heading realizing a knob parameter (inverse of knob_param)."""
    theta0, theta1 = angle_range
    p0, p1 = param_range
    if p1 == p0:
        raise ValueError("param range must be non-degenerate")
    frac = (param - p0) / (p1 - p0)
    frac = min(max(frac, 0.0), 1.0)
    return normalize_angle(theta0 + frac * (theta1 - theta0))


def button_state(
    pose: Pose2D, trigger: Point, radius: float, was_pressed: bool
) -> bool:
    """Proximity button with release hysteresis to suppress sensor chatter."""
    if radius <= 0.0:
        raise ValueError("button radius must be positive")
    d = pose.distance_to(trigger)
    if was_pressed:
        return d <= radius + BUTTON_RELEASE_HYSTERESIS_CM
    return d <= radius


@dataclass
class WidgetSpec:
    """One configured widget plus its current parameter state."""

    widget_id: int
    kind: str
    bound_robot_ids: list[int] = field(default_factory=list)
    # control_points geometry
    base_size: tuple[float, float] | None = None
    # slider geometry
    track: tuple[Point, Point] | None = None
    # knob geometry
    angle_range: tuple[float, float] | None = None
    param_range: tuple[float, float] = (0.0, 1.0)
    # button geometry
    trigger_point: Point | None = None
    trigger_radius: float | None = None
    # live state
    params: dict[str, float] = field(default_factory=dict)
    pressed: bool = False
    target_param: float | None = None

    def __post_init__(self):
        if self.kind not in WIDGET_KINDS:
            raise ValueError(f"bad widget kind {self.kind!r}")
        if self.kind == "control_points" and self.base_size is None:
            raise ValueError("control_points widget needs base_size")
        if self.kind == "slider" and self.track is None:
            raise ValueError("slider widget needs a track")
        if self.kind == "knob" and self.angle_range is None:
            raise ValueError("knob widget needs angle_range")
        if self.kind == "button" and (
            self.trigger_point is None or self.trigger_radius is None
        ):
            raise ValueError("button widget needs trigger point and radius")

    def update_from_poses(self, poses: dict[int, Pose2D]) -> dict[str, float]:
        """Refresh parameter state from the bound robots' current poses."""
        if self.kind == "control_points":
            ul = poses.get(self.bound_robot_ids[0])
            br = poses.get(self.bound_robot_ids[1])
            if ul is not None and br is not None and br.x > ul.x and br.y > ul.y:
                state = image_state_from_anchors(ul.position, br.position, self.base_size)
                self.params = {
                    "tx": state.translation[0],
                    "ty": state.translation[1],
                    "scale": state.scale,
                    "aspect_violation": 1.0 if state.aspect_violation else 0.0,
                }
        elif self.kind == "slider":
            pose = poses.get(self.bound_robot_ids[0])
            if pose is not None:
                self.params = {"value": slider_param(pose, self.track)}
        elif self.kind == "knob":
            pose = poses.get(self.bound_robot_ids[0])
            if pose is not None:
                self.params = {
                    "value": knob_param(pose.theta, self.angle_range, self.param_range)
                }
        elif self.kind == "button":
            pose = poses.get(self.bound_robot_ids[0])
            if pose is not None:
                self.pressed = button_state(
                    pose, self.trigger_point, self.trigger_radius, self.pressed
                )
                self.params = {"pressed": 1.0 if self.pressed else 0.0}
        return self.params

    def goal_for_target(self, current: Pose2D) -> tuple[Point, float | None] | None:
        """(target point, target heading) realizing target_param, if any."""
        if self.target_param is None:
            return None
        if self.kind == "slider":
            return slider_goal(self.track, self.target_param), None
        if self.kind == "knob":
            heading = knob_goal(self.angle_range, self.target_param, self.param_range)
            return current.position, heading
        return None
