import logging
import sys
from collections import deque
from copy import copy
from typing import Literal

import click

from covert_bc.config import Config


class DefaultFormatter(logging.Formatter):
    logging_level_color = {
        logging.DEBUG: "cyan",
        logging.INFO: "green",
        logging.WARNING: "yellow",
        logging.ERROR: "red",
        logging.CRITICAL: "bright_red",
    }

    def __init__(
        self,
        fmt: str | None = None,
        datefmt: str | None = None,
        style: Literal["%", "{", "$"] = "%",
        use_colors: bool | None = None,
    ):
        if use_colors in (True, False):
            self.use_colors = use_colors and sys.stderr.isatty()
        else:
            self.use_colors = False

        super().__init__(fmt=fmt, datefmt=datefmt, style=style)

    def formatMessage(self, record: logging.LogRecord) -> str:
        record_copy = copy(record)
        if self.use_colors:
            record_copy.levelname = click.style(
                record.levelname,
                fg=self.logging_level_color.get(record.levelno, "bright_red"),
            )

        return super().formatMessage(record_copy)


def get_logging_config(config: Config) -> dict:
    if config.logging.display_datetime:
        default_format = "%(asctime)s %(levelname)s: [%(name)s] %(message)s"
    else:
        default_format = "%(levelname)s: [%(name)s] %(message)s"

    level = config.logging.level.value if config.logging.enable else "CRITICAL"
    # warnings always reach the sidecar messages
    logger_level = min(logging.getLevelName(level), logging.WARNING)
    logging_config = {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "default": {
                "()": "covert_bc.log.DefaultFormatter",
                "fmt": default_format,
                "use_colors": config.logging.use_colors,
            },
            # no timestamps, sidecars must be reproducible
            "run_messages": {"format": "%(levelname)s: [%(name)s] %(message)s"},
        },
        "handlers": {
            "default": {
                "level": level,
                "formatter": "default",
                "class": "logging.StreamHandler",
                "stream": "ext://sys.stderr",
            },
            "run_messages": {
                "level": "WARNING",
                "formatter": "run_messages",
                "class": "covert_bc.log.RunMessageHandler",
            },
        },
        "loggers": {
            "covert_bc": {
                "handlers": ["default", "run_messages"],
                "propagate": False,
                "level": logger_level,
            },
        },
    }
    return logging_config


_run_messages = deque(maxlen=200)


class RunMessageHandler(logging.Handler):
    def emit(self, record):
        try:
            if self.filter(record):
                _run_messages.append(self.format(record))

        except Exception:
            self.handleError(record)


def get_run_messages() -> list[str]:
    return list(_run_messages)


def clear_run_messages():
    _run_messages.clear()
