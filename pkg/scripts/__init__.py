"""Utility scripts for addspline."""
