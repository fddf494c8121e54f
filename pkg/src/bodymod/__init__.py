"""Body-weight modification toolkit: statistical shape model, Laplacian
stitching, live modification methods, estimation-task protocols, robust
statistics, and a session service."""

from . import cli, config, interaction, mesh, rigid, service, shapemodel, stats, tasks

__all__ = ["cli", "config", "interaction", "mesh", "rigid", "service",
           "shapemodel", "stats", "tasks"]
__version__ = "0.1.0"
