"""Carsharing BEV fleets and power-sector costs: mobility diaries to a
least-cost capacity expansion model."""

__version__ = "0.1.0"
