"""Command-line interface for lgmm experiments."""

from .main import cli

__all__ = ["cli"]
