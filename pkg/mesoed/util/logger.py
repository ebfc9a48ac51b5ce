"""
The package logger.

This code is based on that provided by SunPy and AstroPy see
    licenses/SUNPY.rst and licenses/ASTROPY.rst
"""
import os
import sys
import logging
import warnings
from contextlib import contextmanager

from astropy.logger import AstropyLogger

from mesoed.util.exceptions import MesoedWarning, NumericalAccuracyWarning

__all__ = ["MesoedLogger", "RunLog"]

LOGGER_OPTIONS = [
    "log_level",
    "use_color",
    "log_warnings",
    "log_exceptions",
    "log_to_file",
    "log_file_path",
    "log_file_level",
    "log_file_format",
]

LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class RunLog:
    """
    Warnings collected while one experiment ran.

    Parameters
    ----------
    experiment : `str`
    seed : `int`
    """

    def __init__(self, experiment, seed):
        self._experiment = experiment
        self._seed = seed
        self._records = []

    @property
    def tag(self):
        """(`str`) Prefix put on log messages emitted during the run."""
        return f"{self._experiment} seed={self._seed}"

    @property
    def warnings(self):
        """(`list` of `warnings.WarningMessage`) Every warning raised during the run."""
        return list(self._records)

    @property
    def accuracy_warnings(self):
        """(`list` of `str`) Messages of the `NumericalAccuracyWarning` raised during the run."""
        return [
            str(record.message)
            for record in self._records
            if issubclass(record.category, NumericalAccuracyWarning)
        ]


class _RunTagFilter(logging.Filter):
    def __init__(self, run_log):
        super().__init__()
        self.run_log = run_log

    def filter(self, record):
        if not getattr(record, "run", None):
            record.run = self.run_log.tag
            record.msg = f"[{record.run}] {record.msg}"
        return True


def _module_name(path):
    """Find the importable name of the module whose source file is ``path``."""
    base = os.path.splitext(path)[0]
    for name, module in list(sys.modules.items()):
        try:
            # some modules raise on attribute access
            module_base = os.path.splitext(getattr(module, "__file__", "") or "")[0]
        except Exception:
            continue
        if module_base == base:
            return name
    return None


class MesoedLogger(AstropyLogger):
    """
    The ``mesoed`` logger.

    It inherits the enhancements of `~astropy.logger.AstropyLogger` but
    captures warnings deriving from `~mesoed.util.exceptions.MesoedWarning`
    rather than Astropy's; every other warning is handed back to the
    original ``showwarning``. Inside `run_context` messages are tagged with
    the running experiment and its seed.
    """

    def _showwarning(self, *args, **kwargs):
        warning = args[0]
        if not isinstance(warning, MesoedWarning):
            return self._showwarning_orig(*args, **kwargs)

        # plain MesoedWarning is shown without its class name
        if type(warning) is MesoedWarning:
            message = str(warning)
        else:
            message = f"{type(warning).__name__}: {warning}"

        origin = _module_name(args[2])
        if origin is None:
            self.warning(message)
        else:
            self.warning(message, extra={"origin": origin})

    @contextmanager
    def run_context(self, experiment, seed):
        """
        Tag log output and collect warnings while an experiment runs.

        Warnings are recorded and then re-issued when the block exits, so
        they still reach the log and any outer warning filters.

        Parameters
        ----------
        experiment : `str`
        seed : `int`

        Yields
        ------
        run_log : `RunLog`
        """
        run_log = RunLog(experiment, seed)
        tag_filter = _RunTagFilter(run_log)
        self.addFilter(tag_filter)
        try:
            with warnings.catch_warnings(record=True) as records:
                warnings.simplefilter("always")
                yield run_log
        finally:
            self.removeFilter(tag_filter)
            run_log._records.extend(records)
            for record in records:
                warnings.warn_explicit(
                    record.message, record.category, record.filename, record.lineno
                )


def _init_log(config=None):
    """
    Initializes the log.

    In most circumstances this is called automatically when importing.
    This code is based on that provided by Astropy see
    "licenses/ASTROPY.rst".
    """
    orig_logger_cls = logging.getLoggerClass()
    logging.setLoggerClass(MesoedLogger)
    try:
        log = logging.getLogger("mesoed")
        if config is not None:
            _config_to_loggerConf(config)
        log._set_defaults()
    finally:
        logging.setLoggerClass(orig_logger_cls)

    return log


def _config_to_loggerConf(config):
    """
    Translates the ``[logger]`` section of configrc to `astropy.logger.Conf`.

    Unknown level names fall back to the Astropy default with a warning.
    """
    from astropy.logger import Conf as LoggerConf

    from mesoed.util.exceptions import warn_user

    conf = LoggerConf()
    if not config.has_section("logger"):
        return conf
    for option in LOGGER_OPTIONS:
        if not config.has_option("logger", option):
            continue
        value = config.get("logger", option)
        if option in ("log_level", "log_file_level") and value.upper() not in LEVELS:
            warn_user(f"Ignoring unknown logger {option} '{value}'.")
            continue
        setattr(conf, option, value)
    return conf
