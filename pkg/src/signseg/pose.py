"""Pose sequence model: parsing, serialization, resampling, normalization, point selection.

A pose sequence is a stack of per-frame 3D keypoints plus per-point confidences.
Confidence 0 marks a missing point; its coordinates are placeholders that every
consumer must ignore.
"""

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .numutil import round_half_away

FORMAT_VERSION = "poseseq-json/1"

# Point-name substrings that mark leg keypoints; matched during normalization.
LEG_MARKERS = ("HIP", "KNEE", "ANKLE", "HEEL", "FOOT_INDEX")

BODY_POINTS = (
    "NOSE",
    "LEFT_EYE_INNER", "LEFT_EYE", "LEFT_EYE_OUTER",
    "RIGHT_EYE_INNER", "RIGHT_EYE", "RIGHT_EYE_OUTER",
    "LEFT_EAR", "RIGHT_EAR",
    "MOUTH_LEFT", "MOUTH_RIGHT",
    "LEFT_SHOULDER", "RIGHT_SHOULDER",
    "LEFT_ELBOW", "RIGHT_ELBOW",
    "LEFT_WRIST", "RIGHT_WRIST",
    "LEFT_PINKY", "RIGHT_PINKY",
    "LEFT_INDEX", "RIGHT_INDEX",
    "LEFT_THUMB", "RIGHT_THUMB",
    "LEFT_HIP", "RIGHT_HIP",
    "LEFT_KNEE", "RIGHT_KNEE",
    "LEFT_ANKLE", "RIGHT_ANKLE",
    "LEFT_HEEL", "RIGHT_HEEL",
    "LEFT_FOOT_INDEX", "RIGHT_FOOT_INDEX",
)

HAND_POINTS = (
    "WRIST",
    "T_CMC", "T_MCP", "T_IP", "T_TIP",
    "I_MCP", "I_PIP", "I_DIP", "I_TIP",
    "M_MCP", "M_PIP", "M_DIP", "M_TIP",
    "R_MCP", "R_PIP", "R_DIP", "R_TIP",
    "P_MCP", "P_PIP", "P_DIP", "P_TIP",
)

FACE_POINT_COUNT = 468


@dataclass(frozen=True)
class PoseComponent:
    name: str
    points: tuple[str, ...]


@dataclass
class PoseSequence:
    """fps plus coords (T, K, 3) and conf (T, K); K is the sum of component sizes."""

    fps: float
    components: tuple[PoseComponent, ...]
    coords: np.ndarray
    conf: np.ndarray

    @property
    def num_frames(self) -> int:
        return self.coords.shape[0]

    @property
    def num_points(self) -> int:
        return sum(len(c.points) for c in self.components)

    def component_offset(self, name: str) -> int:
        off = 0
        for c in self.components:
            if c.name == name:
                return off
            off += len(c.points)
        raise ValueError(f"pose has no component named {name!r}")

    def component(self, name: str) -> PoseComponent:
        for c in self.components:
            if c.name == name:
                return c
        raise ValueError(f"pose has no component named {name!r}")

    def point_index(self, component: str, point: str) -> int:
        comp = self.component(component)
        off = self.component_offset(component)
        try:
            return off + comp.points.index(point)
        except ValueError:
            raise ValueError(
                f"component {component!r} has no point named {point!r}"
            ) from None

    def find_point(self, point: str) -> int:
        """Global column index of the first point with this name, any component."""
        off = 0
        for c in self.components:
            if point in c.points:
                return off + c.points.index(point)
            off += len(c.points)
        raise ValueError(f"pose has no point named {point!r}")


def holistic_components() -> tuple[PoseComponent, ...]:
    """Canonical full-body skeleton: 33-point body, 468-point face, two 21-point hands."""
    face = tuple(f"FACE_{i}" for i in range(FACE_POINT_COUNT))
    return (
        PoseComponent("BODY", BODY_POINTS),
        PoseComponent("FACE", face),
        PoseComponent("LEFT_HAND", HAND_POINTS),
        PoseComponent("RIGHT_HAND", HAND_POINTS),
    )


def _validate_arrays(components, coords, conf):
    k = sum(len(c.points) for c in components)
    if coords.ndim != 3 or coords.shape[1:] != (k, 3):
        raise ValueError(
            f"coords shape {coords.shape} does not match {k} declared points"
        )
    if conf.shape != coords.shape[:2]:
        raise ValueError(f"conf shape {conf.shape} does not match coords")
    if not np.isfinite(coords).all():
        raise ValueError("pose contains a non-finite coordinate")
    if not np.isfinite(conf).all():
        raise ValueError("pose contains a non-finite confidence")
    if conf.size and (conf.min() < 0 or conf.max() > 1):
        raise ValueError("confidence values must lie in [0, 1]")


def make_pose(fps, components, coords, conf) -> PoseSequence:
    """Build a validated PoseSequence from arrays."""
    if not (isinstance(fps, (int, float)) and fps > 0):
        raise ValueError("fps must be a positive number")
    components = tuple(components)
    coords = np.asarray(coords, dtype=float)
    conf = np.asarray(conf, dtype=float)
    _validate_arrays(components, coords, conf)
    return PoseSequence(fps, components, coords, conf)


def parse_pose(text: str) -> PoseSequence:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(f"malformed pose document: {e}") from None
    if not isinstance(doc, dict):
        raise ValueError("malformed pose document: top level is not an object")
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported pose format version {version!r}")
    fps = doc.get("fps")
    if not (isinstance(fps, (int, float)) and not isinstance(fps, bool) and fps > 0):
        raise ValueError("fps must be a positive number")

    raw_components = doc.get("components")
    if not isinstance(raw_components, list):
        raise ValueError("components must be a list")
    components = []
    seen = set()
    for rc in raw_components:
        if not (isinstance(rc, dict) and isinstance(rc.get("name"), str)
                and isinstance(rc.get("points"), list)
                and all(isinstance(p, str) for p in rc["points"])):
            raise ValueError("component entries must be {name, points} objects")
        if rc["name"] in seen:
            raise ValueError(f"duplicate component name {rc['name']!r}")
        seen.add(rc["name"])
        if len(set(rc["points"])) != len(rc["points"]):
            raise ValueError(f"component {rc['name']!r} has duplicate point names")
        components.append(PoseComponent(rc["name"], tuple(rc["points"])))
    k = sum(len(c.points) for c in components)

    frames = doc.get("frames")
    if not isinstance(frames, list):
        raise ValueError("frames must be a list")
    t = len(frames)
    coords = np.zeros((t, k, 3), dtype=float)
    conf = np.zeros((t, k), dtype=float)
    for ti, frame in enumerate(frames):
        if not isinstance(frame, list) or len(frame) != k:
            raise ValueError(
                f"frame {ti} has {len(frame) if isinstance(frame, list) else '?'} points, expected {k}"
            )
        for ki, pt in enumerate(frame):
            if isinstance(pt, list) and len(pt) == 3:
                raise ValueError(
                    f"frame {ti} point {ki} has no z axis; 3D [x, y, z, confidence] points are required"
                )
            if not (isinstance(pt, list) and len(pt) == 4
                    and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pt)):
                raise ValueError(f"frame {ti} point {ki} is not an [x, y, z, confidence] quadruple")
            coords[ti, ki] = pt[:3]
            conf[ti, ki] = pt[3]
    _validate_arrays(tuple(components), coords, conf)
    return PoseSequence(fps, tuple(components), coords, conf)


def serialize_pose(seq: PoseSequence) -> str:
    """Canonical single-line JSON; floats use shortest round-trip decimals."""
    _validate_arrays(seq.components, seq.coords, seq.conf)
    if not (isinstance(seq.fps, (int, float)) and seq.fps > 0):
        raise ValueError("fps must be a positive number")
    frames = []
    for ti in range(seq.num_frames):
        row = []
        for ki in range(seq.num_points):
            x, y, z = seq.coords[ti, ki]
            row.append([float(x), float(y), float(z), float(seq.conf[ti, ki])])
        frames.append(row)
    doc = {
        "version": FORMAT_VERSION,
        "fps": seq.fps,
        "components": [{"name": c.name, "points": list(c.points)} for c in seq.components],
        "frames": frames,
    }
    return json.dumps(doc, separators=(",", ":"), allow_nan=False)


def load_pose(path) -> PoseSequence:
    with open(path, encoding="utf-8") as f:
        return parse_pose(f.read())


def save_pose(path, seq: PoseSequence) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_pose(seq))


def resample_fps(seq: PoseSequence, target_fps: float) -> PoseSequence:
    """Nearest-frame resampling: output frame i is input frame round(i*src/target)."""
    if not target_fps > 0:
        raise ValueError("target fps must be positive")
    t = seq.num_frames
    if seq.fps == target_fps:
        return PoseSequence(seq.fps, seq.components, seq.coords.copy(), seq.conf.copy())
    t_out = round_half_away(t * target_fps / seq.fps)
    idx = np.empty(t_out, dtype=int)
    for i in range(t_out):
        idx[i] = min(max(round_half_away(i * seq.fps / target_fps), 0), t - 1)
    return PoseSequence(target_fps, seq.components, seq.coords[idx].copy(), seq.conf[idx].copy())


def normalize_pose(seq: PoseSequence) -> PoseSequence:
    """Scale and center on the shoulders, drop leg points, zero missing points.

    The uniform scale makes the confidence-weighted mean shoulder distance 1;
    the translation puts the weighted mean shoulder midpoint at the origin.
    Only frames where both shoulders are tracked contribute to the statistics.
    """
    li = seq.find_point("LEFT_SHOULDER")
    ri = seq.find_point("RIGHT_SHOULDER")
    left = seq.coords[:, li, :]
    right = seq.coords[:, ri, :]
    w = seq.conf[:, li] * seq.conf[:, ri]
    if not (w > 0).any():
        raise ValueError("cannot normalize: shoulders are never tracked")
    dist = np.linalg.norm(left - right, axis=1)
    mean_dist = float((w * dist).sum() / w.sum())
    if mean_dist == 0:
        raise ValueError("cannot normalize: mean shoulder distance is zero")
    mid = (left + right) / 2
    mean_mid = (w[:, None] * mid).sum(axis=0) / w.sum()

    coords = (seq.coords - mean_mid) / mean_dist
    conf = seq.conf.copy()

    keep = []
    components = []
    off = 0
    for c in seq.components:
        kept_points = []
        for j, p in enumerate(c.points):
            if any(m in p for m in LEG_MARKERS):
                continue
            kept_points.append(p)
            keep.append(off + j)
        off += len(c.points)
        if kept_points:
            components.append(PoseComponent(c.name, tuple(kept_points)))
    coords = coords[:, keep, :]
    conf = conf[:, keep]
    coords[conf == 0] = 0.0
    return PoseSequence(seq.fps, tuple(components), coords, conf)


@dataclass(frozen=True)
class PointSelector:
    """Ordered (component, point) entries; point None selects the whole component."""

    name: str
    entries: tuple[tuple[str, str | None], ...]


def _face_contour_entries() -> tuple[tuple[str, str], ...]:
    # The contour membership is estimator specific, so it ships as data, not code.
    raw = resources.files("signseg.data").joinpath("face_contours.json").read_text()
    doc = json.loads(raw)
    comp = doc["component"]
    return tuple((comp, f"{comp}_{i}") for i in doc["indices"])


def named_selector(name: str) -> PointSelector:
    if name == "body75":
        return PointSelector("body75", (("BODY", None), ("LEFT_HAND", None), ("RIGHT_HAND", None)))
    if name == "face-contour-128":
        return PointSelector("face-contour-128", _face_contour_entries())
    raise ValueError(f"unknown selector {name!r}; known: body75, face-contour-128")


def select_points(seq: PoseSequence, selector: PointSelector) -> PoseSequence:
    """Restrict a sequence to the selector's points, grouped by component."""
    by_comp: dict[str, list[int]] = {}
    for comp_name, point in selector.entries:
        comp = seq.component(comp_name)
        off = seq.component_offset(comp_name)
        cols = by_comp.setdefault(comp_name, [])
        if point is None:
            cols.extend(range(off, off + len(comp.points)))
        else:
            try:
                j = comp.points.index(point)
            except ValueError:
                raise ValueError(
                    f"selector {selector.name!r}: component {comp_name!r} has no point {point!r}"
                ) from None
            cols.append(off + j)
    components = []
    order: list[int] = []
    all_points = [p for c in seq.components for p in c.points]
    for comp_name, cols in by_comp.items():
        components.append(PoseComponent(comp_name, tuple(all_points[i] for i in cols)))
        order.extend(cols)
    return PoseSequence(
        seq.fps, tuple(components), seq.coords[:, order, :].copy(), seq.conf[:, order].copy()
    )
