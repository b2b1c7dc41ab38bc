"""Block independent likelihood ratio test for high-dimensional mean vectors."""

__version__ = "0.3.0"
