"""Oriented slap-fingerprint segmentation toolkit."""

from .geometry import Quad, RotatedBox, contains, rotated_iou, to_quad, wrap_degrees

__all__ = ["Quad", "RotatedBox", "contains", "rotated_iou", "to_quad", "wrap_degrees"]

__version__ = "0.1.0"
