"""
Simple logging utility for PartialADMM
"""
import logging
import sys

from config import Config


def setup_logger(name="partial_admm", level=None):
    """
    Create and configure a logger

    Args:
        name: Logger name (default: "partial_admm")
        level: Level name; falls back to Config.LOG_LEVEL

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)
    logger.setLevel(level or Config.LOG_LEVEL)

    # Don't add handlers if already exist (avoid duplicates)
    if logger.handlers:
        return logger

    handler = logging.StreamHandler(sys.stdout)
    handler.setLevel(logging.DEBUG)

    formatter = logging.Formatter(
        '%(asctime)s - %(levelname)s - %(message)s',
        datefmt='%H:%M:%S'
    )
    handler.setFormatter(formatter)
    logger.addHandler(handler)

    return logger


# Create a default logger that can be imported
logger = setup_logger()
