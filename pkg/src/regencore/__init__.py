"""Concurrent-failure recovery layered on minimum-storage regenerating codes."""

__version__ = "0.1.0"
