"""Structured requirements to temporal logic, contracts and trace verdicts."""

__version__ = "0.1.0"
