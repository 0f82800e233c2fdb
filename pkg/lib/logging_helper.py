# PLATECELL
# This helper module is used to provide a Log() object that uses the python 'logging' module, but adds additional info, like the module name.
# Default levels are process-wide and get overridden by the 'logging' section of the run config (see set_defaults()).

import logging
import os

LOG_DIR = "logs"  # Directory for the log files (only used if file logging is enabled)
LOG_FILE = "platecell.log"  # Shared log file name if the files are not split by module
LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL", "NONE"]

_DEFAULTS = {
    "log_level_stdout": "WARNING",
    "log_level_file": "none",
    "split_files_by_module": False,
}
_INSTANCES = {}  # module_name -> Log, so set_defaults() can re-apply levels to existing loggers


def set_defaults(log_level_stdout=None, log_level_file=None, split_files_by_module=None):
    """Sets the process-wide default levels and re-applies them to every logger created without explicit levels.

    Args:
        log_level_stdout (str): Level for the stream handler ('none' disables it)
        log_level_file (str): Level for the file handler ('none' disables it)
        split_files_by_module (bool): Write one log file per module instead of one shared file

    Returns:
        None
    """
    if log_level_stdout is not None:
        _DEFAULTS["log_level_stdout"] = str(log_level_stdout)
    if log_level_file is not None:
        _DEFAULTS["log_level_file"] = str(log_level_file)
    if split_files_by_module is not None:
        _DEFAULTS["split_files_by_module"] = bool(split_files_by_module)

    for log in _INSTANCES.values():
        if log.uses_defaults:
            log.setup_handlers()


def get_defaults():
    """Returns a copy of the current default logging settings."""
    return dict(_DEFAULTS)


class Log:
    """The Log class is used to provide a Log() object that uses the python 'logging' module, but adds additional info, like the module name.

    Args:
        module_name (str): The name of the module
        log_level (str): Level used for both handlers if the specific ones are not given
        log_level_file (str): Level of the file handler
        log_level_stdout (str): Level of the stream handler

    Returns:
        None
    """

    def __init__(
        self,
        module_name,
        log_level="none",
        log_level_file="none",
        log_level_stdout="none",
    ):
        try:
            self.module_name = module_name
            self.logger = logging.getLogger(module_name)
            self.logger.setLevel(10)
            self.logger.propagate = False

            self.log_level = log_level
            self.log_level_file = log_level_file
            self.log_level_stdout = log_level_stdout
            self.uses_defaults = log_level == "none" and log_level_file == "none" and log_level_stdout == "none"

            self.setup_handlers()
            _INSTANCES[module_name] = self
        except Exception as e:
            print(f"[CRITICAL] The logger object for {module_name} could not be initialized.")
            raise (e)

    def setup_handlers(self):
        """(Re)creates the file and stream handlers from the explicit levels or the process-wide defaults."""
        formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")

        log_level_file = self.log_level_file
        log_level_stdout = self.log_level_stdout if self.log_level_stdout != "none" else self.log_level
        if self.uses_defaults:
            log_level_file = _DEFAULTS["log_level_file"]
            log_level_stdout = _DEFAULTS["log_level_stdout"]

        if self.logger.hasHandlers():  # Remove duplicate handlers
            self.logger.handlers.clear()

        if log_level_file.lower() != "none":
            if _DEFAULTS["split_files_by_module"]:
                path = os.path.join(LOG_DIR, self.module_name + ".log")
            else:
                path = os.path.join(LOG_DIR, LOG_FILE)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            handlerFile = logging.FileHandler(path)
            handlerFile.setLevel(log_level_file.upper())
            handlerFile.setFormatter(formatter)
            self.logger.addHandler(handlerFile)

        if log_level_stdout.lower() != "none":
            handlerStream = logging.StreamHandler()  # stderr, stdout is reserved for command output
            handlerStream.setLevel(log_level_stdout.upper())
            handlerStream.setFormatter(formatter)
            self.logger.addHandler(handlerStream)

    def set_level(self, level):
        """Change the logging level of the logger object and also for all its handlers."""
        self.logger.setLevel(level.upper())

        for handler in self.logger.handlers:
            handler.setLevel(level.upper())

    def debug(self, message):
        """Logs a debug message.

        Args:
            message (str): The message

        Returns:
            None
        """
        self.logger.debug(message)

    def info(self, message):
        """Logs an info message."""
        self.logger.info(message)

    def warning(self, message):
        """Logs a warning message."""
        self.logger.warning(message)

    def error(self, message):
        """Logs an error message."""
        self.logger.error(message)

    def critical(self, message):
        """Logs a critical message."""
        self.logger.critical(message)
