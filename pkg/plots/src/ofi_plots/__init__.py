"""Deterministic figure rendering for ofi-lab pipeline exports."""

__version__ = "0.1.0"
