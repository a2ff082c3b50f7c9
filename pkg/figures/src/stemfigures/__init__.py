"""Figure rendering for the two-stage market case study (CSV in, images out)."""

from .render import FigureSpec, RenderError, render_all

__version__ = "0.1.0"
__all__ = ["FigureSpec", "RenderError", "render_all", "__version__"]
