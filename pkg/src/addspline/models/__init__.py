"""
Models package for addspline.
Contains the data structures shared by the numerical modules.
"""
