"""Fault-proneness prediction from class-level source code metrics."""

__version__ = "0.1.0"
