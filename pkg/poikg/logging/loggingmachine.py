import argparse
import atexit
import copy
import logging as stdlogging
import multiprocessing as mp
import os
import sys
from logging.handlers import QueueHandler, QueueListener, RotatingFileHandler
from typing import NamedTuple, Optional

from statemachine import StateMachine, State

from poikg.config import Config
from poikg.logging.defines import (
    TRACE_LOG_FORMAT,
    DATE_FORMAT,
    POIKG_LOGGER_NAME,
    DEFAULT_LOG_FILE_NAME,
    DEFAULT_LOGGING_DIR,
    DEFAULT_MAX_ROTATING_LOG_FILE_SIZE,
    DEFAULT_LOG_BACKUP_COUNT,
)
from poikg.logging.format import StreamFormatter, FileFormatter
from poikg.logging.helpers import all_loggers


class LoggingConfig(NamedTuple):
    debug: bool
    trace: bool
    record_log: bool
    logging_dir: str


def _env_flag(name: str) -> bool:
    return os.getenv(name, "").strip().lower() in ("1", "true", "yes", "on")


def _join(prefix: str, msg: str, suffix: str) -> str:
    return " - ".join(str(part) for part in (prefix, msg, suffix) if part)


class LoggingMachine(StateMachine):
    """
    Handles logger states for poikg and 3rd party libraries.

    Records from every logger go through one queue; a single listener fans
    them out to the console and, when ``record_log`` is on, to a rotating file.
    """

    Default = State(initial=True)
    Debug = State()
    Trace = State()
    Disabled = State()

    enable_default = (
            Debug.to(Default)
            | Trace.to(Default)
            | Disabled.to(Default)
            | Default.to(Default)
    )

    enable_trace = (
            Default.to(Trace) | Debug.to(Trace) | Disabled.to(Trace) | Trace.to(Trace)
    )

    enable_debug = (
            Default.to(Debug) | Trace.to(Debug) | Disabled.to(Debug) | Debug.to(Debug)
    )

    disable_trace = Trace.to(Default)

    disable_debug = Debug.to(Default)

    disable_logging = (
            Trace.to(Disabled)
            | Debug.to(Disabled)
            | Default.to(Disabled)
            | Disabled.to(Disabled)
    )

    def __init__(self, config: Config, name: str = POIKG_LOGGER_NAME):
        super(LoggingMachine, self).__init__()
        self._queue = mp.Queue(-1)
        self._name = name
        self._config = self._section(config)

        self._stream_formatter = StreamFormatter()
        self._file_formatter = FileFormatter(TRACE_LOG_FORMAT, DATE_FORMAT)

        self._handlers = self._configure_handlers(self._config)
        self._listener = self._create_and_start_listener(self._handlers)

        self._logger = self._initialize_logger(name)
        self.disable_third_party_loggers()

    @staticmethod
    def _section(config):
        """Accepts either a full config holding a ``logging`` section or the section itself."""
        if config is None:
            return LoggingConfig(debug=False, trace=False, record_log=False, logging_dir="")
        if isinstance(config, dict) and isinstance(config.get("logging"), dict):
            return config["logging"]
        return config

    def _logfile(self, config) -> Optional[str]:
        if not (config.record_log and config.logging_dir):
            return None
        logging_dir = os.path.abspath(os.path.expanduser(config.logging_dir))
        os.makedirs(logging_dir, exist_ok=True)
        return os.path.join(logging_dir, DEFAULT_LOG_FILE_NAME)

    def _configure_handlers(self, config) -> list[stdlogging.Handler]:
        handlers = list()

        stream_handler = stdlogging.StreamHandler(sys.stdout)
        stream_handler.setFormatter(self._stream_formatter)
        handlers.append(stream_handler)

        logfile = self._logfile(config)
        if logfile:
            handlers.append(self._create_file_handler(logfile))
        return handlers

    def get_config(self):
        return self._config

    def set_config(self, config):
        """
        Set config after initialization, if desired.
        """
        config = self._section(config)
        self._config = config
        logfile = self._logfile(config)
        if logfile:
            self._enable_file_logging(logfile)
        if config.trace:
            self.set_trace(True)
        elif config.debug:
            self.set_debug(True)

    def _create_and_start_listener(self, handlers):
        listener = QueueListener(self._queue, *handlers, respect_handler_level=True)
        listener.start()
        atexit.register(listener.stop)
        return listener

    def get_queue(self):
        """
        Get the queue the QueueListener is publishing from.

        Worker processes must attach a QueueHandler on this queue to their loggers.
        """
        return self._queue

    def _initialize_logger(self, name):
        logger = stdlogging.getLogger(name)
        logger.addHandler(QueueHandler(self._queue))
        logger.setLevel(stdlogging.INFO)
        logger.propagate = False
        return logger

    def _create_file_handler(self, logfile: str):
        file_handler = RotatingFileHandler(
            logfile,
            maxBytes=DEFAULT_MAX_ROTATING_LOG_FILE_SIZE,
            backupCount=DEFAULT_LOG_BACKUP_COUNT,
        )
        file_handler.setFormatter(self._file_formatter)
        file_handler.setLevel(stdlogging.TRACE)
        return file_handler

    def enable_third_party_loggers(self):
        for logger in all_loggers():
            if logger.name == self._name:
                continue
            logger.addHandler(QueueHandler(self._queue))
            logger.setLevel(self._logger.level)

    def disable_third_party_loggers(self):
        for logger in all_loggers():
            if logger.name == self._name:
                continue
            for handler in list(logger.handlers):
                logger.removeHandler(handler)

    def _enable_file_logging(self, logfile: str):
        # one file handler at most
        if any(isinstance(handler, RotatingFileHandler) for handler in self._handlers):
            return
        self._handlers.append(self._create_file_handler(logfile))
        self._listener.handlers = tuple(self._handlers)

    def _set_default_levels(self):
        self._logger.setLevel(stdlogging.INFO)
        for logger in all_loggers():
            if logger.name == self._name:
                continue
            logger.setLevel(stdlogging.CRITICAL)

    # state transitions
    def before_transition(self, event, state):
        self._listener.stop()

    def after_transition(self, event, state):
        self._listener.start()

    def before_enable_default(self):
        self._logger.info("Enabling default logging.")
        self._stream_formatter.set_trace(False)
        self._set_default_levels()

    def before_enable_trace(self):
        self._logger.info("Enabling trace.")
        self._stream_formatter.set_trace(True)
        for logger in all_loggers():
            logger.setLevel(stdlogging.TRACE)

    def after_enable_trace(self):
        self._logger.info("Trace enabled.")

    def before_disable_trace(self):
        self._logger.info("Disabling trace.")
        self._stream_formatter.set_trace(False)
        self._set_default_levels()

    def before_enable_debug(self):
        self._logger.info("Enabling debug.")
        self._stream_formatter.set_trace(True)
        for logger in all_loggers():
            logger.setLevel(stdlogging.DEBUG)

    def after_enable_debug(self):
        self._logger.info("Debug enabled.")

    def before_disable_debug(self):
        self._logger.info("Disabling debug.")
        self._stream_formatter.set_trace(False)
        self._set_default_levels()

    def before_disable_logging(self):
        self._logger.info("Disabling logging.")
        self._stream_formatter.set_trace(False)
        for logger in all_loggers():
            logger.setLevel(stdlogging.CRITICAL)

    @property
    def __trace_on__(self):
        return self.current_state_value == "Trace"

    def trace(self, msg="", prefix="", suffix="", *args, **kwargs):
        self._logger.trace(_join(prefix, msg, suffix), *args, **kwargs)

    def debug(self, msg="", prefix="", suffix="", *args, **kwargs):
        self._logger.debug(_join(prefix, msg, suffix), *args, **kwargs)

    def info(self, msg="", prefix="", suffix="", *args, **kwargs):
        self._logger.info(_join(prefix, msg, suffix), *args, **kwargs)

    def success(self, msg="", prefix="", suffix="", *args, **kwargs):
        self._logger.success(_join(prefix, msg, suffix), *args, **kwargs)

    def warning(self, msg="", prefix="", suffix="", *args, **kwargs):
        self._logger.warning(_join(prefix, msg, suffix), *args, **kwargs)

    def error(self, msg="", prefix="", suffix="", *args, **kwargs):
        self._logger.error(_join(prefix, msg, suffix), *args, **kwargs)

    def critical(self, msg="", prefix="", suffix="", *args, **kwargs):
        self._logger.critical(_join(prefix, msg, suffix), *args, **kwargs)

    def exception(self, msg="", prefix="", suffix="", *args, **kwargs):
        self._logger.exception(_join(prefix, msg, suffix), *args, **kwargs)

    def on(self):
        self._logger.info("Logging enabled.")
        self.enable_default()

    def off(self):
        self.disable_logging()

    def set_debug(self, on: bool = True):
        if on and not self.current_state_value == "Debug":
            self.enable_debug()
        elif not on and self.current_state_value == "Debug":
            self.disable_debug()

    def set_trace(self, on: bool = True):
        if on and not self.current_state_value == "Trace":
            self.enable_trace()
        elif not on and self.current_state_value == "Trace":
            self.disable_trace()

    def get_level(self):
        return self._logger.level

    @classmethod
    def add_args(cls, parser: argparse.ArgumentParser, prefix: str = None):
        """Accept specific arguments from parser"""
        prefix_str = "" if prefix is None else prefix + "."
        try:
            parser.add_argument(
                "--" + prefix_str + "logging.debug",
                action="store_true",
                help="""Turn on poikg debugging information""",
                default=_env_flag("LOGGING_DEBUG"),
            )
            parser.add_argument(
                "--" + prefix_str + "logging.trace",
                action="store_true",
                help="""Turn on poikg trace level information""",
                default=_env_flag("LOGGING_TRACE"),
            )
            parser.add_argument(
                "--" + prefix_str + "logging.record_log",
                action="store_true",
                help="""Turns on logging to file.""",
                default=_env_flag("LOGGING_RECORD_LOG"),
            )
            parser.add_argument(
                "--" + prefix_str + "logging.logging_dir",
                type=str,
                help="Logging default root directory.",
                default=os.getenv("LOGGING_LOGGING_DIR") or DEFAULT_LOGGING_DIR,
            )
        except argparse.ArgumentError:
            # re-parsing arguments.
            pass

    @classmethod
    def config(cls) -> Config:
        """Get config from the argument parser.

        Return:
            config object
        """
        parser = argparse.ArgumentParser()
        cls.add_args(parser)
        return Config(parser, args=[])

    def __call__(
            self,
            config: Config = None,
            debug: bool = None,
            trace: bool = None,
            record_log: bool = None,
            logging_dir: str = None,
    ):
        if config is not None:
            cfg = copy.deepcopy(self._section(config))
            if debug is not None:
                cfg.debug = debug
            if trace is not None:
                cfg.trace = trace
            if record_log is not None:
                cfg.record_log = record_log
            if logging_dir is not None:
                cfg.logging_dir = logging_dir
        else:
            cfg = LoggingConfig(
                debug=bool(debug),
                trace=bool(trace),
                record_log=bool(record_log),
                logging_dir=logging_dir or "",
            )
        self.set_config(cfg)
