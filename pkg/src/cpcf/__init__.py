"""Correlation filter tracker with a temporal consistency constraint."""

from .config import TrackerConfig
from .tracker import BoundingBox, CPCFTracker

__all__ = ["BoundingBox", "CPCFTracker", "TrackerConfig"]
