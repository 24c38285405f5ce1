"""Data-driven newsvendor decisions under censored demand."""

__version__ = "0.1.0"
