"""
Logging configuration and utilities.
"""
import logging
import sys
from src.addspline.config.settings import LOG_LEVEL, LOG_FORMAT


def setup_logger(name: str = "addspline") -> logging.Logger:
    """
    Set up and return a configured logger.

    Args:
        name: Logger name (default: "addspline")

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    # Only configure if not already configured
    if not logger.handlers:
        logger.setLevel(getattr(logging, LOG_LEVEL))

        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setLevel(getattr(logging, LOG_LEVEL))
        console_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(console_handler)

    return logger


# Create default logger instance
logger = setup_logger()
