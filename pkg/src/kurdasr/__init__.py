"""Data preparation and evaluation toolkit for Kurmanji speech recognition."""

from .errors import KurdasrError

__version__ = "0.1.0"

__all__ = ["KurdasrError", "__version__"]
