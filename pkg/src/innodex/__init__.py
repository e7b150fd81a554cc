"""Zip-level neighborhood innovation index from place, permit, job and census data."""

__version__ = "0.1.0"
