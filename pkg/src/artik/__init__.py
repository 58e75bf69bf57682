"""Articulated 3D anomaly detection with pose-conditioned signed distance fields."""

__version__ = "0.1.0"
