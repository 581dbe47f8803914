"""Partially accelerated primal-dual methods for saddle-point problems."""

from . import core, linop, metrics, problems, prox, schedules, solver

__version__ = "0.1.0"

__all__ = ["core", "linop", "metrics", "problems", "prox", "schedules", "solver"]
