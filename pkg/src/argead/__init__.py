"""Reference-free scoring and generation harness for soccer audio descriptions."""

__version__ = "0.1.0"
