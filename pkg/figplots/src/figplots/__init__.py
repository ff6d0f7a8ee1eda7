"""Render arraymusic run/sweep directories into annotated figures.

This package reads only the documented on-disk formats (``manifest.cfg``,
``metrics.csv``, ``scene.csv``, 16-bit PGM pseudospectra with their scale
sidecars); it never imports the simulation package.
"""

__version__ = "0.1.0"

from .errors import MissingInputError
from .render import FigureKind, FigureSpec, render
