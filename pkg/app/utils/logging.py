import os
import sys
from loguru import logger
from app.config import settings


def setup_logging(level: str = None):
    """Configure application logging.

    Console output goes to stderr so that command output on stdout (CSV rows,
    reports, resolved configs) stays machine-readable.

    Args:
        level: Overrides ``settings.LOG_LEVEL`` when given.
    """
    level = level or settings.LOG_LEVEL

    # Remove default logger
    logger.remove()

    logger.add(
        sys.stderr,
        level=level,
        format="<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>",
        colorize=True,
    )

    if settings.LOG_FILE:
        log_dir = os.path.dirname(settings.LOG_FILE)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        logger.add(
            settings.LOG_FILE,
            rotation="10 MB",
            retention="1 week",
            level=level,
            format="{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {name}:{function}:{line} - {message}",
        )

    logger.debug(f"Logging initialized at level {level}")

    return logger
