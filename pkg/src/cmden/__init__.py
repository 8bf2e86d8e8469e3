"""CMDEN - cascaded monocular depth estimation by direct optimization."""

__version__ = "0.1.0"
