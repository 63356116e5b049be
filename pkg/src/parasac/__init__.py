"""Soft Actor-Critic for massively parallel simulation, in plain numpy."""

__version__ = "0.1.0"
