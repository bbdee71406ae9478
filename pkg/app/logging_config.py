#!/usr/bin/env python3

import logging
import os

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LOG_FILENAME = "netctrl.log"


def setup_logging(level: int = logging.INFO, log_dir: str | None = None) -> None:
    """Configure logging for the application

    Console output goes to stderr so JSON and CSV written to stdout stay clean.

    Args:
        level: Root logger level
        log_dir: Directory for the log file (no file handler when None)
    """
    handlers: list[logging.Handler] = [logging.StreamHandler()]
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        handlers.append(logging.FileHandler(os.path.join(log_dir, LOG_FILENAME)))

    logging.basicConfig(
        level=level,
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
