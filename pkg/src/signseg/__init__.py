"""Pose-based sign language segmentation: features, tagging, decoding, metrics."""

__version__ = "0.1.0"

from .pose import PoseSequence, load_pose, parse_pose, save_pose, serialize_pose
from .tags import Segment, TagScheme, decode_tags, encode_tags, retime_segments

__all__ = [
    "PoseSequence", "Segment", "TagScheme",
    "load_pose", "parse_pose", "save_pose", "serialize_pose",
    "encode_tags", "decode_tags", "retime_segments",
    "__version__",
]
