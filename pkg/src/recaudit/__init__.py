"""Audit analytics for recommendation exposure trajectories, plus an
agent-based collaborative-filtering model that generates such trajectories."""

__version__ = "0.1.0"
