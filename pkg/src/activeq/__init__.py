"""Learned active-learning strategies: a Q-network that picks which point to annotate next."""

__version__ = "0.1.0"
