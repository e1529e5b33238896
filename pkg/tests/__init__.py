"""Tests for addspline."""
