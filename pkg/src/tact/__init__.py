"""Inductive relation prediction with topology-aware relational correlation.

Submodules are imported on demand so that the command-line entry point can
configure numeric thread pools before numpy loads.
"""

__version__ = "0.1.0"
