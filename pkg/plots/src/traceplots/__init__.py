"""Figure rendering for subspace-optimization benchmark CSVs."""

from .figures import FigureSpec, heatmap_matrix, load_columns, render

__version__ = "0.1.0"

__all__ = ["FigureSpec", "heatmap_matrix", "load_columns", "render"]
