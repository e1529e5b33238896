"""
Configuration management for addspline.
"""
