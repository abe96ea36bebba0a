"""
Logging for the simulator.

Every module logs through a child of the ``src`` package logger, which owns
the handlers: a console handler and, when LOG_FILE is set, a rotating file.
Progress bars and log lines share the terminal through tqdm.
"""

import logging
import os
from contextlib import contextmanager
from logging.handlers import RotatingFileHandler
from typing import Iterator, Optional

from tqdm.contrib.logging import logging_redirect_tqdm

from src.config.settings import settings

PACKAGE = "src"
MAX_LOG_SIZE = 5 * 1024 * 1024  # 5MB
BACKUP_COUNT = 3

CONSOLE_FORMAT = "%(levelname)s - %(message)s"
FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def _level(name: str) -> int:
    return getattr(logging, name.upper(), logging.INFO)


def setup_logger(log_file: Optional[str] = None) -> logging.Logger:
    """
    Configure the package logger once.

    Args:
        log_file: Optional path of a rotating log file

    Returns:
        logging.Logger: The ``src`` logger holding the handlers
    """
    root = logging.getLogger(PACKAGE)
    if root.handlers:
        return root

    root.setLevel(_level(settings.logging.LEVEL))
    root.propagate = False

    console = logging.StreamHandler()
    console.setFormatter(logging.Formatter(CONSOLE_FORMAT))
    root.addHandler(console)

    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_file, maxBytes=MAX_LOG_SIZE, backupCount=BACKUP_COUNT
        )
        file_handler.setFormatter(logging.Formatter(FILE_FORMAT))
        root.addHandler(file_handler)

    return root


def get_logger(name: str) -> logging.Logger:
    """
    Logger for a module, always below the package logger.

    ``python -m src`` runs the entry point as ``__main__``; it is filed as
    ``src.main``.
    """
    setup_logger(settings.logging.FILE or None)
    if name != PACKAGE and not name.startswith(PACKAGE + "."):
        name = f"{PACKAGE}.{name.strip('_')}"
    return logging.getLogger(name)


def set_level(level: str) -> None:
    settings.logging.LEVEL = level.upper()
    setup_logger(settings.logging.FILE or None).setLevel(_level(level))


@contextmanager
def progress_safe_logging() -> Iterator[None]:
    """Route console records through tqdm.write while progress bars are drawn."""
    with logging_redirect_tqdm(loggers=[logging.getLogger(PACKAGE)]):
        yield
