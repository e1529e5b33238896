"""Unit tests for addspline."""
