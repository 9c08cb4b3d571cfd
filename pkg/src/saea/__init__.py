"""Surrogate-assisted PSO and GA with per-component energy profiling."""

from . import optim, profile, stats, surrogate, traffic

__all__ = ["optim", "profile", "stats", "surrogate", "traffic"]
__version__ = "0.1.0"
