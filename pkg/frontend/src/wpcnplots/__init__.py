"""Figure rendering for irswpcn sweep results."""

from .plotting import KINDS, FigureResult, FigureSpec, PlotError, SeriesInfo, render

__version__ = "0.1.0"
