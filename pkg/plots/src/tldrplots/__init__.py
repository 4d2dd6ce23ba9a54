"""Figure rendering for tldrgrid run outputs."""

from .series import RunSeries, SchemaError, load_series
from .figures import plot_coverage, plot_goal_metrics, plot_heatmap

__all__ = ["RunSeries", "SchemaError", "load_series",
           "plot_coverage", "plot_goal_metrics", "plot_heatmap"]
