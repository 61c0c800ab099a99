import logging
import os
from typing import Optional

from ..config import settings


def setup_logging(
    log_file: Optional[str] = None, debug: bool = False, console_level: Optional[int] = None
) -> logging.Logger:
    """
    Set up logging for the structinfer library.

    Args:
        log_file: Path to the log file
        debug: Whether to enable debug mode (more verbose logging)
        console_level: Optional specific level for console logging

    Returns:
        The package logger configured with handlers
    """
    if log_file is None:
        log_file = settings.log_file

    logger = logging.getLogger("structinfer")
    logger.handlers = []  # Clear existing handlers to prevent duplicates

    configured_level = getattr(logging, settings.log_level.upper(), logging.INFO)
    configured_console_level = getattr(
        logging, settings.console_log_level.upper(), logging.WARNING
    )

    file_level = logging.DEBUG if debug else configured_level
    if console_level is None:
        console_level = logging.DEBUG if debug else configured_console_level

    logger.setLevel(min(file_level, console_level))

    formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")

    # File Handler
    try:
        log_dir = os.path.dirname(log_file)
        if log_dir and not os.path.exists(log_dir):
            os.makedirs(log_dir, exist_ok=True)

        fh = logging.FileHandler(log_file, encoding="utf-8")
        fh.setLevel(file_level)
        fh.setFormatter(formatter)
        logger.addHandler(fh)
    except Exception as e:
        fallback = logging.StreamHandler()
        fallback.setLevel(logging.WARNING)
        fallback.setFormatter(formatter)
        logger.addHandler(fallback)

        logger.error(f"File logging failed at {log_file}. Using console fallback. Error: {e}")

    # Console Handler
    ch = logging.StreamHandler()
    ch.setLevel(console_level)
    ch.setFormatter(formatter)
    logger.addHandler(ch)

    logger.propagate = False

    logger.info("structinfer logging initialized")
    if debug:
        logger.debug("Debug logging enabled")

    return logger
