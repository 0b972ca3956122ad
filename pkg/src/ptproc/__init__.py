"""Interacting Skellam and birth-death-migration vector processes."""

__version__ = "0.1.0"
