"""Command-line front end."""

from .main import main, run

__all__ = ["main", "run"]
