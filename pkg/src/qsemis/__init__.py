"""QAOA plus real-time quantum subspace expansion for maximum independent set."""

__version__ = "0.1.0"
