"""Figure rendering for the volatility-model estimation CLI's CSV outputs."""

from .figures import KINDS, FigureSpec, SchemaError, build_figure, render

__version__ = "0.1.0"

__all__ = ["KINDS", "FigureSpec", "SchemaError", "build_figure", "render"]
