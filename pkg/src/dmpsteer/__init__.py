"""Operator-steerable execution of DMP-encoded behaviors over surfaces."""

__version__ = "0.1.0"
