"""Post-hoc figures from dynamic-clustering trace CSVs."""

from .render import SchemaError, load_trace, render

__all__ = ["SchemaError", "load_trace", "render"]
