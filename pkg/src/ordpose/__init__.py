"""Ordinal-depth supervision toolkit for 3D human pose.

Losses and representations for training with pairwise closer/farther depth
relations instead of metric 3D ground truth, a synthetic-skeleton experiment
harness, and an adaptive pairwise annotation protocol with an HTTP service.
"""

__version__ = "0.1.0"
