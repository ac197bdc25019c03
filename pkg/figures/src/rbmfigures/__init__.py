"""Error-bar figure renderer for variance-ratio report CSVs."""

__version__ = "0.1.0"

from .render import FigureSpec, MissingSeriesError, SchemaError, \
    build_figure, collect_series, read_report, render
