"""Biased voter model on stacked lattices, its dual walks, and clone-speed asymptotics."""

__version__ = "0.1.0"
