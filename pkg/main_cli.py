#!/usr/bin/env python3
"""
Main entry point for the addspline command line.
"""
import sys

from src.addspline.cli import main

if __name__ == "__main__":
    sys.exit(main())
