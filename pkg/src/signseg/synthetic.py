"""Seeded synthetic fixtures: moving-arm pose clips and segment corpora.

The motion model keeps the skeleton at rest outside segments and sweeps the
right wrist (plus its hand) along a closed constant-speed arc inside each
sign segment, so optical flow is nonzero exactly on segment frames.
"""

import numpy as np

from .pose import HAND_POINTS, PoseComponent, make_pose, save_pose
from .tags import Segment, save_segments

UPPER_BODY_POINTS = (
    "NOSE",
    "LEFT_SHOULDER", "RIGHT_SHOULDER",
    "LEFT_ELBOW", "RIGHT_ELBOW",
    "LEFT_WRIST", "RIGHT_WRIST",
)

# Flat right hand at rest: wrist at the origin, fingers up (-y), palm toward
# the camera. Rows follow HAND_POINTS order.
HAND_SHAPE = np.array([
    [0.00, 0.00, 0.00],
    [-0.25, -0.20, 0.05], [-0.45, -0.45, 0.08], [-0.60, -0.70, 0.10], [-0.70, -0.90, 0.12],
    [-0.30, -1.00, 0.00], [-0.35, -1.35, 0.02], [-0.38, -1.60, 0.04], [-0.40, -1.80, 0.05],
    [0.00, -1.05, 0.00], [0.00, -1.45, 0.02], [0.00, -1.72, 0.04], [0.00, -1.95, 0.05],
    [0.28, -1.00, 0.00], [0.32, -1.38, 0.02], [0.35, -1.62, 0.04], [0.38, -1.80, 0.05],
    [0.52, -0.85, 0.00], [0.58, -1.15, 0.02], [0.62, -1.35, 0.04], [0.66, -1.52, 0.05],
])

assert HAND_SHAPE.shape == (len(HAND_POINTS), 3)

_BODY_BASE = np.array([
    [1.00, 0.55, 0.00],
    [0.80, 1.00, 0.00], [1.20, 1.00, 0.00],
    [0.72, 1.35, 0.00], [1.28, 1.35, 0.00],
    [0.70, 1.70, 0.00], [1.30, 1.70, 0.00],
])

_HAND_SCALE = 0.12


def hand_template(mirror: bool = False) -> np.ndarray:
    """Copy of the resting hand shape; mirror flips it into a left hand."""
    pts = HAND_SHAPE.copy()
    if mirror:
        pts[:, 0] = -pts[:, 0]
    return pts


def upper_body_components() -> tuple[PoseComponent, ...]:
    return (
        PoseComponent("BODY", UPPER_BODY_POINTS),
        PoseComponent("LEFT_HAND", HAND_POINTS),
        PoseComponent("RIGHT_HAND", HAND_POINTS),
    )


def _rest_frame() -> np.ndarray:
    left = _BODY_BASE[5] + hand_template(mirror=True) * _HAND_SCALE
    right = _BODY_BASE[6] + hand_template() * _HAND_SCALE
    return np.concatenate([_BODY_BASE, left, right], axis=0)


def _segment_layout(rng, num_frames: int):
    """Sign segments grouped into phrases; short gaps inside a phrase, long between."""
    signs: list[Segment] = []
    phrases: list[Segment] = []
    t = 3 + int(rng.integers(0, 3))
    while t < num_frames - 12:
        group_size = int(rng.integers(1, 3))
        group: list[Segment] = []
        for gi in range(group_size):
            if gi:
                t += int(rng.integers(3, 5))
            length = int(rng.integers(8, 15))
            if t + length > num_frames - 3:
                break
            group.append(Segment(t, t + length))
            t += length
        if not group:
            break
        signs.extend(group)
        phrases.append(Segment(group[0].start, group[-1].end))
        t = group[-1].end + int(rng.integers(10, 15))
    return signs, phrases


def motion_pose(seed: int, fps: float = 25.0, num_frames: int = 100):
    """A clip whose right arm moves exactly during sign segments.

    Inside a segment of length L the wrist traces a circle in c full cycles:
    offset(i) = A*(sin(th+p) - sin(p), cos(p) - cos(th+p)), th = 2*pi*c*(i+1)/L.
    The offset is zero at both ends, so frame-to-frame displacement (and the
    flow channel) is a positive constant on [start, end) and zero elsewhere.

    Returns (PoseSequence, {"sign": [...], "phrase": [...]}).
    """
    rng = np.random.default_rng(seed)
    signs, phrases = _segment_layout(rng, num_frames)
    coords = np.tile(_rest_frame()[None, :, :], (num_frames, 1, 1))
    conf = np.ones(coords.shape[:2])
    body = list(UPPER_BODY_POINTS)
    wrist = body.index("RIGHT_WRIST")
    elbow = body.index("RIGHT_ELBOW")
    hand = np.arange(len(body) + len(HAND_POINTS), coords.shape[1])
    moving = np.concatenate([[wrist], hand])
    for seg in signs:
        length = seg.end - seg.start
        cycles = int(rng.integers(1, 3))
        amp = 0.08 + 0.07 * rng.random()
        phase = rng.random() * 2.0 * np.pi
        for i, t in enumerate(range(seg.start, seg.end)):
            theta = 2.0 * np.pi * cycles * (i + 1) / length
            dx = amp * (np.sin(theta + phase) - np.sin(phase))
            dy = amp * (np.cos(phase) - np.cos(theta + phase))
            coords[t, moving, 0] += dx
            coords[t, moving, 1] += dy
            coords[t, elbow, 0] += 0.5 * dx
            coords[t, elbow, 1] += 0.5 * dy
    seq = make_pose(fps, upper_body_components(), coords, conf)
    return seq, {"sign": signs, "phrase": phrases}


def write_clip_dir(dirpath, seeds, fps: float = 25.0, num_frames: int = 100) -> list[str]:
    """Materialize motion clips as paired pose/segments files; returns the stems."""
    import os

    os.makedirs(dirpath, exist_ok=True)
    stems = []
    for seed in seeds:
        seq, tiers = motion_pose(seed, fps=fps, num_frames=num_frames)
        stem = f"clip{seed:03d}"
        save_pose(os.path.join(dirpath, f"{stem}.pose.json"), seq)
        save_segments(os.path.join(dirpath, f"{stem}.segments.json"), fps, tiers)
        stems.append(stem)
    return stems


def adjacency_corpus(num_segments: int = 1000, junction_stride: int = 10,
                     seed: int = 0) -> list[Segment]:
    """Gold segments where every junction_stride-th gap is zero (adjacent pair)."""
    rng = np.random.default_rng(seed)
    segs = []
    t = 2 + int(rng.integers(0, 4))
    for i in range(num_segments):
        length = int(rng.integers(4, 13))
        segs.append(Segment(t, t + length))
        t += length
        if i % junction_stride != 3:
            t += int(rng.integers(2, 9))
    return segs


def adjacency_rate(segments) -> float:
    segs = sorted(segments)
    junctions = sum(1 for a, b in zip(segs, segs[1:]) if a.end == b.start)
    return junctions / len(segs)


def random_rotation(rng) -> np.ndarray:
    m = rng.normal(size=(3, 3))
    q, r = np.linalg.qr(m)
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def scattered_copies(points: np.ndarray, count: int, seed: int,
                     noise: float = 0.0) -> list[np.ndarray]:
    """Rigid+scale transformed copies of one landmark set, optionally jittered."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        rot = random_rotation(rng)
        scale = 0.5 + 1.5 * rng.random()
        shift = rng.normal(size=3) * 2.0
        pts = (points @ rot.T) * scale + shift
        if noise > 0:
            pts = pts + rng.normal(size=pts.shape) * noise
        out.append(pts)
    return out
