"""Deterministic multi-agent inspection-mission simulator and coordination
service: auction-based task allocation, back-chained behavior-tree agent
autonomy, and risk-aware voxel path planning, with a live operator API."""

__version__ = "0.1.0"
