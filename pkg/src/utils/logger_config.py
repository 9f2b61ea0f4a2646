"""
logger_config.py
----------------
Shared logging for the engines and the CLI.

- RIGIDITY_LOG_DIR: directory of the rotating app.log (default: logs)
- RIGIDITY_LOG_LEVEL: logger level (default: INFO)

The console only shows warnings unless the CLI lowers it with --log-level.
"""

import logging
import os
from logging.handlers import RotatingFileHandler
from typing import Union

LOG_DIR = os.getenv("RIGIDITY_LOG_DIR", "logs")
os.makedirs(LOG_DIR, exist_ok=True)

LOG_FILE = os.path.join(LOG_DIR, "app.log")
LOG_LEVEL = os.getenv("RIGIDITY_LOG_LEVEL", "INFO").upper()

FORMATTER = logging.Formatter(
    fmt="%(asctime)s | %(levelname)-8s | %(name)s | %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S"
)

_CONSOLE_HANDLERS = []
_console_level = logging.WARNING


def get_logger(name: str) -> logging.Logger:
    """Logger with one console (stderr) and one rotating file handler; records still propagate."""
    logger = logging.getLogger(name)

    if not logger.handlers:  # one set of handlers per logger, even on repeated imports
        logger.setLevel(getattr(logging, LOG_LEVEL, logging.INFO))

        console_handler = logging.StreamHandler()
        console_handler.setFormatter(FORMATTER)
        console_handler.setLevel(_console_level)
        _CONSOLE_HANDLERS.append(console_handler)

        file_handler = RotatingFileHandler(
            LOG_FILE, maxBytes=2_000_000, backupCount=5, encoding="utf-8"
        )
        file_handler.setFormatter(FORMATTER)

        logger.addHandler(console_handler)
        logger.addHandler(file_handler)

    return logger


def set_console_level(level: Union[str, int]) -> int:
    """Console threshold for every logger created so far and from now on; returns the numeric level."""
    global _console_level
    numeric = logging.getLevelName(level.upper()) if isinstance(level, str) else int(level)
    if not isinstance(numeric, int):
        raise ValueError(f"Unknown log level: {level!r}")
    _console_level = numeric
    for handler in _CONSOLE_HANDLERS:
        handler.setLevel(numeric)
    return numeric
