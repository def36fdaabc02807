"""Exact evidence for amenable group actions on graphs and trees."""

__version__ = "0.1.0"
