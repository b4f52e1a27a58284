"""Continuous AI-audit infrastructure: catalog, workflow, statement store, queries."""

__version__ = "0.1.0"
