"""Headless figure rendering for symbiosim output files."""

from .render import FigureSpec, SchemaError, render

__version__ = "0.1.0"

__all__ = ["FigureSpec", "SchemaError", "render", "__version__"]
