"""Bayesian inverse reinforcement learning from stationary and learning demonstrators."""

__version__ = "0.1.0"
