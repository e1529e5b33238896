"""Integration tests for addspline."""
