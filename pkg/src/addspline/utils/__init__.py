"""
Utility functions and helpers for addspline.
"""
