import logging
import sys
from typing import Optional

from core.config import LAB_LOG_LEVEL


# ANSI color codes for CLI readability
class Colors:
    GREEN = "\033[92m"
    YELLOW = "\033[93m"
    RED = "\033[91m"
    BLUE = "\033[94m"
    RESET = "\033[0m"


LEVEL_COLORS = {
    logging.DEBUG: "",
    logging.INFO: Colors.BLUE,
    logging.WARNING: Colors.YELLOW,
    logging.ERROR: Colors.RED,
    logging.CRITICAL: Colors.RED,
}


class ColorFormatter(logging.Formatter):
    """Prefixes records with the level color when writing to a terminal"""

    def __init__(self, use_color: bool = True):
        super().__init__("%(asctime)s %(levelname)-7s %(name)s: %(message)s", "%H:%M:%S")
        self.use_color = use_color

    def format(self, record: logging.LogRecord) -> str:
        message = super().format(record)
        if not self.use_color:
            return message
        color = getattr(record, "color", None) or LEVEL_COLORS.get(record.levelno, "")
        return f"{color}{message}{Colors.RESET}" if color else message


_configured = set()


def get_logger(name: str, level: Optional[str] = None) -> logging.Logger:
    """Return a module logger with a single colored stream handler"""
    logger = logging.getLogger(name)
    root_name = name.split(".")[0]
    root = logging.getLogger(root_name)
    if root_name not in _configured:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(ColorFormatter(use_color=sys.stderr.isatty()))
        root.addHandler(handler)
        root.setLevel(level or LAB_LOG_LEVEL)
        root.propagate = False
        _configured.add(root_name)
    return logger


def set_level(level: str) -> None:
    for root_name in _configured:
        logging.getLogger(root_name).setLevel(level)


def success(logger: logging.Logger, message: str) -> None:
    logger.info(f"✅ {message}", extra={"color": Colors.GREEN})


def failure(logger: logging.Logger, message: str) -> None:
    logger.error(f"❌ {message}")


def warn(logger: logging.Logger, message: str) -> None:
    logger.warning(f"⚠ {message}")
