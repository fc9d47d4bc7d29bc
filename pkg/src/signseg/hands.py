"""3D hand landmark geometry: canonical normalization, orientation estimators,
and the multi-view / crop consistency metrics.

Axis convention throughout: screen style, x right, y down, z toward the camera.
All operations take 21-landmark hands in the standard anatomical order
(WRIST, thumb, index, middle, ring, pinky; 4 joints per finger).
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .pose import HAND_POINTS

WRIST = 0
I_MCP = HAND_POINTS.index("I_MCP")
M_MCP = HAND_POINTS.index("M_MCP")
P_MCP = HAND_POINTS.index("P_MCP")

BONE_LENGTH = 200.0  # canonical middle-metacarpal length after normalization

_EPS = 1e-12


class Handedness(Enum):
    LEFT = "left"
    RIGHT = "right"


class Plane(Enum):
    WALL = "wall"
    FLOOR = "floor"


class View(Enum):
    FRONT = "front"
    SIDEWAYS = "sideways"
    BACK = "back"


@dataclass(frozen=True)
class HandPose:
    """points: (21, 3) float array; handedness tells which hand was captured."""

    points: np.ndarray
    handedness: Handedness = Handedness.RIGHT

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (21, 3):
            raise ValueError(f"hand must have shape (21, 3), got {pts.shape}")
        if not np.isfinite(pts).all():
            raise ValueError("hand contains non-finite coordinates")
        object.__setattr__(self, "points", pts)


def _normal_of(points: np.ndarray) -> np.ndarray:
    n = np.cross(points[I_MCP] - points[WRIST], points[P_MCP] - points[WRIST])
    norm = np.linalg.norm(n)
    scale = max(
        np.linalg.norm(points[I_MCP] - points[WRIST]),
        np.linalg.norm(points[P_MCP] - points[WRIST]),
        _EPS,
    )
    if norm <= _EPS * scale * scale:
        raise ValueError("degenerate palm: WRIST, I_MCP, P_MCP are collinear")
    return n / norm


def palm_normal(hand: HandPose) -> np.ndarray:
    """Unit normal of the WRIST/I_MCP/P_MCP plane, right-hand rule in that order."""
    return _normal_of(hand.points)


def hand_normalize(hand: HandPose) -> HandPose:
    """Map a hand into the canonical frame.

    Left hands are mirrored across the YZ plane first so both hands share one
    frame. Then the hand is rotated so the middle metacarpal lies exactly on
    +Y with the palm normal in the +Z half of the YZ plane, scaled so the
    metacarpal is BONE_LENGTH long, and the wrist is moved to the origin.
    Idempotent, and invariant to rigid motion plus positive uniform scaling.
    """
    pts = hand.points
    if hand.handedness is Handedness.LEFT:
        pts = pts * np.array([-1.0, 1.0, 1.0])
    q = pts - pts[WRIST]
    bone = q[M_MCP]
    length = np.linalg.norm(bone)
    if length <= _EPS:
        raise ValueError("zero-length middle metacarpal")
    y = bone / length
    n = _normal_of(q)
    z = n - np.dot(n, y) * y
    z_norm = np.linalg.norm(z)
    if z_norm <= 1e-9:
        raise ValueError("degenerate hand: palm normal parallel to the metacarpal")
    z = z / z_norm
    x = np.cross(y, z)
    basis = np.stack([x, y, z])  # rows are the new axes
    out = (q @ basis.T) * (BONE_LENGTH / length)
    return HandPose(out, Handedness.RIGHT)


def _angle_deg(u: float, v: float) -> float:
    return math.degrees(math.atan2(v, u))


def estimate_plane(hand: HandPose) -> Plane:
    """WALL when the y extent of the metacarpal (biased 1.5x) beats its z extent."""
    d = hand.points[M_MCP] - hand.points[WRIST]
    y = abs(d[1]) * 1.5
    z = abs(d[2])
    return Plane.WALL if y > z else Plane.FLOOR


def estimate_view(hand: HandPose) -> View:
    n = palm_normal(hand)
    if estimate_plane(hand) is Plane.WALL:
        a = _angle_deg(n[2], n[0]) % 360.0
        if a > 210:
            return View.FRONT
        if a > 150:
            return View.SIDEWAYS
        return View.BACK
    a = _angle_deg(n[1], n[0])
    if a >= 180.0:
        a -= 360.0
    if a > 0:
        return View.FRONT
    if a > -60:
        return View.SIDEWAYS
    return View.BACK


def estimate_rotation(hand: HandPose) -> int:
    """Eight 45-degree bins for the metacarpal's XY direction; bin 0 is 'up' (+Y)."""
    d = hand.points[M_MCP] - hand.points[WRIST]
    if abs(d[0]) <= _EPS and abs(d[1]) <= _EPS:
        raise ValueError("metacarpal has zero-length XY projection")
    theta = _angle_deg(d[1], -d[0]) % 360.0  # counterclockwise from +Y; +X maps to 270
    return int(((theta + 22.5) % 360.0) // 45.0)


@dataclass(frozen=True)
class HandGroup:
    label: str
    members: tuple[HandPose, ...]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))


def _mean_landmark_std(stacks: np.ndarray) -> float:
    # stacks: (N, 21, 3); population std per landmark per axis, then the mean of all 63
    return float(stacks.std(axis=0, ddof=0).mean())


def mace(group: HandGroup) -> float:
    """Multi-angle consistency: mean landmark std across members after full normalization."""
    if len(group.members) < 2:
        raise ValueError("consistency metrics need at least 2 members")
    stacks = np.stack([hand_normalize(m).points for m in group.members])
    return _mean_landmark_std(stacks)


def cce(group: HandGroup) -> float:
    """Crop consistency: mean landmark std after wrist alignment only."""
    if len(group.members) < 2:
        raise ValueError("consistency metrics need at least 2 members")
    stacks = np.stack([m.points - m.points[WRIST] for m in group.members])
    return _mean_landmark_std(stacks)
