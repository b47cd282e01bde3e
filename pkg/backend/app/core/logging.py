"""
Logging configuration for the laboratory.
Sets up logging with file rotation and console output.
"""

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

from app.core.config import get_settings

_HANDLER_TAG = "_srl_lab_handler"


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> logging.Logger:
    """
    Configure logging with both file and console handlers.
    Uses settings from config for log level, file path, and rotation.
    Gracefully handles read-only filesystems. Safe to call repeatedly:
    handlers installed by an earlier call are replaced.

    Args:
        level: Override for LOG_LEVEL.
        log_file: Override for LOG_FILE.

    Returns:
        The configured root logger.
    """
    settings = get_settings()
    level = level or settings.LOG_LEVEL
    log_file = log_file or str(settings.log_path)

    file_formatter = logging.Formatter(
        fmt="%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    )

    console_formatter = logging.Formatter(
        fmt="%(levelname)s:\t%(name)s - %(message)s"
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, level))

    for handler in list(root_logger.handlers):
        if getattr(handler, _HANDLER_TAG, False):
            root_logger.removeHandler(handler)
            handler.close()

    try:
        log_file_path = Path(log_file)
        log_file_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = RotatingFileHandler(
            filename=str(log_file_path),
            maxBytes=settings.log_rotation_bytes,
            backupCount=5,
            encoding="utf-8"
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(file_formatter)
        setattr(file_handler, _HANDLER_TAG, True)
        root_logger.addHandler(file_handler)
    except (OSError, IOError) as e:
        print(f"Warning: Could not set up file logging (read-only filesystem): {e}", file=sys.stderr)
        print("Falling back to console-only logging", file=sys.stderr)

    # stderr keeps stdout free for machine-readable command output
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(getattr(logging, level))
    console_handler.setFormatter(console_formatter)
    setattr(console_handler, _HANDLER_TAG, True)
    root_logger.addHandler(console_handler)

    # Reduce noise from third-party libraries
    logging.getLogger("PIL").setLevel(logging.WARNING)

    return root_logger


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger instance for a specific module.

    Args:
        name: Logger name (typically __name__)

    Returns:
        Logger instance
    """
    return logging.getLogger(name)
