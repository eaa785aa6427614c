"""
Logging utilities for the LGV localization toolkit
"""

import logging
import sys
from typing import Optional, TextIO

ROOT_LOGGER = "lgv_localization"


def setup_logger(
    name: str = ROOT_LOGGER,
    level: int = logging.INFO,
    stream: Optional[TextIO] = None,
) -> logging.Logger:
    """Setup and configure logger.  Output goes to stderr by default so that
    summaries printed on stdout stay machine-readable."""
    logger = logging.getLogger(name)
    logger.setLevel(level)

    # Remove existing handlers
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)

    console_handler = logging.StreamHandler(stream or sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(
        logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
    )
    logger.addHandler(console_handler)
    logger.propagate = False

    return logger


def get_logger(component: str = "") -> logging.Logger:
    """Get the logger for *component*, a child of the package logger."""
    if not component:
        return logging.getLogger(ROOT_LOGGER)
    return logging.getLogger(f"{ROOT_LOGGER}.{component}")
