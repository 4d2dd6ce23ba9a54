"""Temporal-distance-aware goal-conditioned RL on discrete mazes."""

__version__ = "0.1.0"
