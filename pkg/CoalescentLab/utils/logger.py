"""Logging utilities for CoalescentLab."""
import logging
import sys
from pathlib import Path
from typing import Optional


class Logger:
    """Thin wrapper over the package logger with an optional file sink."""

    def __init__(self, log_file: Optional[str] = None, level: int = logging.INFO):
        self.log_file = Path(log_file) if log_file else None
        self.logger = logging.getLogger('CoalescentLab')
        self.logger.setLevel(level)
        self.logger.propagate = False

        formatter = logging.Formatter('%(asctime)s - %(levelname)s - %(message)s')
        if not self.logger.handlers:
            # stderr only: stdout may carry CSV or JSON artifacts
            stream_handler = logging.StreamHandler(sys.stderr)
            stream_handler.setFormatter(formatter)
            self.logger.addHandler(stream_handler)

        if self.log_file is not None:
            self.log_file.parent.mkdir(parents=True, exist_ok=True)
            file_handler = logging.FileHandler(self.log_file, encoding='utf-8')
            file_handler.setFormatter(formatter)
            self.logger.addHandler(file_handler)

    def set_level(self, level: int):
        """Change the threshold of the package logger."""
        self.logger.setLevel(level)

    def debug(self, message: str):
        """Log debug message."""
        self.logger.debug(message)

    def info(self, message: str):
        """Log info message."""
        self.logger.info(message)

    def warning(self, message: str):
        """Log warning message."""
        self.logger.warning(message)

    def error(self, message: str):
        """Log error message."""
        self.logger.error(message)

    def critical(self, message: str):
        """Log critical message."""
        self.logger.critical(message)

    def separator(self):
        """Log a separator line."""
        self.logger.info("=" * 70)


_shared: Optional[Logger] = None


def get_logger() -> Logger:
    """Return the process-wide logger, creating it on first use."""
    global _shared
    if _shared is None:
        _shared = Logger()
    return _shared
