"""Run-chart renderer for dcb-arena summary CSV files."""

__version__ = "0.1.0"

from .render import SeriesSpec, build_figure, load_summary, render
