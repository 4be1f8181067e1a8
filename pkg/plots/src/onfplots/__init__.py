"""Figure regeneration from onfsim CSV/JSON artifacts."""

from .figures import FIGURES, FigureSpec, InputError, SchemaError, \
    build_figure, render

__version__ = "0.1.0"

__all__ = ["FIGURES", "FigureSpec", "InputError", "SchemaError",
           "build_figure", "render"]
