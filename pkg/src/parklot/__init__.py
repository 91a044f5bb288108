"""Indoor parking lot modelling from multi-camera detection annotations."""

__version__ = "0.1.0"
