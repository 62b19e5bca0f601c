import logging
import os

from rich.console import Console
from rich.logging import RichHandler

_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
_STDERR = Console(stderr=True)


def get_logger(name: str):
    logger = logging.getLogger(name)
    if not logger.handlers:
        logger.setLevel(os.getenv("CHANGESCORE_LOG_LEVEL", "INFO").upper())
        logger.propagate = False

        # stdout is reserved for command output
        c_handler = RichHandler(console=_STDERR, show_path=False, show_time=False)
        c_handler.setFormatter(logging.Formatter("%(name)s - %(message)s"))
        logger.addHandler(c_handler)

        log_file = os.getenv("CHANGESCORE_LOG_FILE")
        if log_file:
            f_handler = logging.FileHandler(log_file)
            f_handler.setFormatter(logging.Formatter(_FORMAT))
            logger.addHandler(f_handler)

    return logger


def set_level(level: str):
    """Apply ``level`` to every logger created through :func:`get_logger`."""
    os.environ["CHANGESCORE_LOG_LEVEL"] = level.upper()
    for name in list(logging.root.manager.loggerDict):
        logger = logging.getLogger(name)
        if any(isinstance(h, RichHandler) for h in logger.handlers):
            logger.setLevel(level.upper())
