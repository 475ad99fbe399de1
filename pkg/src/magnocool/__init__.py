"""Moment simulation, cooling baselines and soft actor-critic control of coupled bosonic modes."""

__version__ = "0.1.0"
