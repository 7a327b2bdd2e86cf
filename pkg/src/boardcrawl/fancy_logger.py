# -*- coding: utf-8 -*-
"""
Logging with colors.  Logs go to stderr, so that command output on
stdout stays clean for pipes.
"""

import logging
import os
import sys
import typing

LOGGER_NAME = "boardcrawl"

ANSI_COLORS = {
    "red": 31,
    "green": 32,
    "yellow": 33,
    "cyan": 36,
    "white": 37,
}

LEVEL_COLORS = {
    logging.DEBUG: "cyan",
    logging.INFO: "white",
    logging.WARNING: "yellow",
    logging.ERROR: "red",
    logging.CRITICAL: "red",
}


def paint(color: str, text: str) -> str:
    return f"\033[{ANSI_COLORS[color]}m{text}\033[0m"


def wants_color(stream: typing.TextIO) -> bool:
    # https://no-color.org
    if os.environ.get("NO_COLOR"):
        return False
    return hasattr(stream, "isatty") and stream.isatty()


class ColorfulLoggingFormatter(logging.Formatter):
    """
    Prefixes each line with a timestamp and the level, and colors the
    message by level when the output is a terminal.
    """

    def __init__(self, use_color: bool) -> None:
        super().__init__()
        self.formatters: typing.Dict[int, logging.Formatter] = {}
        for level, color in LEVEL_COLORS.items():
            stamp = "%(asctime)s"
            message = "%(message)s"
            if use_color:
                stamp = paint("green", stamp)
                message = paint(color, message)
            self.formatters[level] = logging.Formatter(
                f"{stamp} %(levelname)7s {message}"
            )

    def format(self, record: logging.LogRecord) -> str:
        formatter = self.formatters.get(record.levelno)
        if formatter is None:
            return record.getMessage()
        text = formatter.format(record)
        # the exception text is cached on the record; let the next
        # formatter render it again
        record.exc_text = None
        return text


def get(name: str = LOGGER_NAME) -> logging.Logger:
    return logging.getLogger(name)


# the CLI may run many times in one process (tests do); re-initializing
# replaces this handler instead of stacking another
_console_handler: typing.Optional[logging.Handler] = None


def init_logging(
    level: typing.Union[int, str],
    stream: typing.Optional[typing.TextIO] = None,
) -> None:
    # pylint: disable=global-statement
    global _console_handler

    if isinstance(level, str):
        level = level.upper()
    out_stream = stream if stream is not None else sys.stderr

    logger = get()
    logger.setLevel(level)
    if _console_handler is not None:
        logger.removeHandler(_console_handler)

    _console_handler = logging.StreamHandler(out_stream)
    _console_handler.setLevel(level)
    _console_handler.setFormatter(ColorfulLoggingFormatter(wants_color(out_stream)))
    logger.addHandler(_console_handler)


def excepthook(exc_type, exc_value, exc_traceback):
    if issubclass(exc_type, (KeyboardInterrupt, SystemExit)):
        sys.__excepthook__(exc_type, exc_value, exc_traceback)
        return
    get().error("Unhandled exception", exc_info=(exc_type, exc_value, exc_traceback))
