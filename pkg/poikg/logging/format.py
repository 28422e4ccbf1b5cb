"""
Formatters for the console and the rotating log file, plus the ``TRACE``
and ``SUCCESS`` levels used by pipeline stages.
"""

import logging
import re
import time

from colorama import Back, Fore, Style, init

init(autoreset=True)

TRACE_LEVEL_NUM = 5
SUCCESS_LEVEL_NUM = 21


def _level_method(levelno: int):
    def log(self, message, *args, **kws):
        if self.isEnabledFor(levelno):
            self._log(levelno, message, args, **kws)

    return log


logging.TRACE = TRACE_LEVEL_NUM
logging.addLevelName(TRACE_LEVEL_NUM, "TRACE")
logging.Logger.trace = _level_method(TRACE_LEVEL_NUM)

logging.SUCCESS = SUCCESS_LEVEL_NUM
logging.addLevelName(SUCCESS_LEVEL_NUM, "SUCCESS")
logging.Logger.success = _level_method(SUCCESS_LEVEL_NUM)

LEVEL_COLORS = {
    logging.TRACE: Fore.MAGENTA,
    logging.DEBUG: Fore.BLUE,
    logging.INFO: Fore.WHITE,
    logging.SUCCESS: Fore.GREEN,
    logging.WARNING: Fore.YELLOW,
    logging.ERROR: Fore.RED,
    logging.CRITICAL: Back.RED,
}

# Inline color tags a message may carry, e.g. "<green>converged</green>".
_TAG = re.compile(r"</?(red|green|blue|yellow)>")
_TAG_COLORS = {"red": Fore.RED, "green": Fore.GREEN, "blue": Fore.BLUE, "yellow": Fore.YELLOW}


def _colorize(msg: str) -> str:
    return _TAG.sub(lambda m: Style.RESET_ALL if m.group(0)[1] == "/" else _TAG_COLORS[m.group(1)], msg)


def _strip_tags(msg: str) -> str:
    return _TAG.sub("", msg)


class _MillisecondFormatter(logging.Formatter):
    def formatTime(self, record, datefmt=None):
        created = self.converter(record.created)
        return time.strftime(datefmt or "%Y-%m-%d %H:%M:%S", created) + ".{:03d}".format(int(record.msecs))


class StreamFormatter(_MillisecondFormatter):
    """Colored level names; origin of the record only in trace mode."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.trace = False

    def _fmt_for(self, levelno: int) -> str:
        color = LEVEL_COLORS.get(levelno, Fore.RESET)
        level = f"{Style.BRIGHT}{color}%(levelname)s{Style.RESET_ALL}"
        origin = " | %(name)s:%(filename)s:%(lineno)s" if self.trace else ""
        return f"{Fore.BLUE}%(asctime)s{Fore.RESET} | {level}{origin} | %(message)s"

    def format(self, record):
        # The style object is shared across records; restore it afterwards.
        format_orig = self._style._fmt
        record.levelname = f"{record.levelname:^16}"
        self._style._fmt = self._fmt_for(record.levelno)
        try:
            # The record also reaches the file handler, so only the output is colored.
            return _colorize(super().format(record))
        finally:
            self._style._fmt = format_orig

    def set_trace(self, state: bool = True):
        self.trace = state


class FileFormatter(_MillisecondFormatter):
    def format(self, record):
        record.levelname = f"{record.levelname:^16}"
        if isinstance(record.msg, str):
            record.msg = _strip_tags(record.msg)
        return super().format(record)
