"""Metric Freedom: how tightly a scoring metric couples run diversity to score spread."""

__version__ = "0.1.0"
