"""Figure regeneration from ackwatch figure-data CSV output."""

__version__ = "0.1.0"

from .figures import FIGURE_IDS, FigureSpec, RenderResult, build_spec, render

__all__ = ["FIGURE_IDS", "FigureSpec", "RenderResult", "build_spec", "render"]
