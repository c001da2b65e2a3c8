"""Console and per-run file logging for the attriqa package logger."""

import logging
import sys
from contextlib import contextmanager
from pathlib import Path

from attriqa.config.settings import settings

PACKAGE_LOGGER = "attriqa"
RUN_LOG_NAME = "run.log"
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# Libraries that log at INFO/DEBUG while decoding PNGs or building colormaps
QUIET_LOGGERS = ("PIL", "matplotlib")


def _formatter() -> logging.Formatter:
    return logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)


def setup_logging(level: str | None = None) -> logging.Logger:
    """One stderr handler on the package logger, however often this is called."""
    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.setLevel(getattr(logging, level or settings.log_level))
    console = [h for h in logger.handlers if getattr(h, "attriqa_console", False)]
    if console:
        # follow a replaced sys.stderr
        console[0].setStream(sys.stderr)
    else:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(_formatter())
        handler.attriqa_console = True
        logger.addHandler(handler)
    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)
    return logger


@contextmanager
def run_log(out_dir: Path | str):
    """Append the package log to <out_dir>/run.log while the block runs."""
    path = Path(out_dir) / RUN_LOG_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(path, encoding="utf-8")
    handler.setFormatter(_formatter())
    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.addHandler(handler)
    try:
        yield path
    finally:
        logger.removeHandler(handler)
        handler.close()
