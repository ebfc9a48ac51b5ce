"""
This module provides configuration file functionality.

This code is based on that provided by SunPy see
    licenses/SUNPY.rst
"""
import os
import shutil
import configparser
from pathlib import Path

from sunpy.extern.appdirs import AppDirs

import mesoed
from mesoed.util.exceptions import warn_user

__all__ = [
    "load_config",
    "copy_default_config",
    "print_config",
    "get_thread_count",
    "CONFIG_DIR",
]

# This is to avoid creating a new config dir for each new dev version.
# We use AppDirs to locate and create the config directory.
dirs = AppDirs("mesoed", "mesoed")
# Default one set by AppDirs
CONFIG_DIR = dirs.user_config_dir
CACHE_DIR = dirs.user_cache_dir

CONFIG_FILENAME = "configrc"


def load_config():
    """
    Read the configuration file.

    If one does not exists in the user's home directory then read in the defaults.
    """
    config = configparser.RawConfigParser()

    # Get locations of configuration files to be loaded
    config_files = _find_config_files()

    # Read in configuration files
    config.read(config_files)

    # Specify the working directory as a default so that the user's home
    # directory can be located in an OS-independent manner
    if not config.has_option("general", "working_dir"):
        config.set("general", "working_dir", str(Path.home() / "mesoed"))

    _check_simulation_options(config, config_files[0])
    return config


def _check_simulation_options(config, default_file):
    """
    Replace unusable ``[simulation]`` and ``[numerics]`` values with the packaged defaults.

    Integers in ``[simulation]`` must be at least 1 and ``[numerics]``
    tolerances must be positive floats.
    """
    defaults = configparser.RawConfigParser()
    defaults.read(default_file)
    for section, kind in (("simulation", int), ("numerics", float)):
        if not defaults.has_section(section):
            continue
        if not config.has_section(section):
            config.add_section(section)
        for option, default in defaults.items(section):
            value = config.get(section, option, fallback=default)
            try:
                usable = kind(value) >= 1 if kind is int else float(value) > 0
            except ValueError:
                usable = False
            if not usable:
                warn_user(f"Ignoring [{section}] {option} = {value!r}; using {default}.")
                config.set(section, option, default)


def _find_config_files():
    """
    Finds locations of configuration files.
    """
    config_files = []

    # find default configuration file
    module_dir = Path(mesoed.__file__).parent
    config_files.append(str(module_dir / "data" / CONFIG_FILENAME))

    # if a user configuration file exists, add that to list of files to read
    # so that any values set there will override ones specified in the default
    # config file
    config_path = Path(_get_user_configdir())
    if config_path.joinpath(CONFIG_FILENAME).exists():
        config_files.append(str(config_path.joinpath(CONFIG_FILENAME)))

    return config_files


def get_thread_count(requested=None):
    """
    Resolve the number of worker threads for replication batches.

    Precedence is the explicit request, then the ``MESOED_THREADS``
    environment variable, then the ``[simulation] threads`` option.

    Parameters
    ----------
    requested : `int`, optional
        An explicitly requested thread count (e.g. from the command line).

    Returns
    -------
    threads : `int`
        A thread count of at least one.
    """
    if requested is not None:
        threads = int(requested)
    elif os.environ.get("MESOED_THREADS"):
        threads = int(os.environ["MESOED_THREADS"])
    else:
        threads = mesoed.config.getint("simulation", "threads", fallback=1)
    if threads < 1:
        raise ValueError(f"Thread count must be at least 1, got {threads}.")
    return threads


def print_config():
    """
    Print current configuration options.
    """
    print("FILES USED:")
    for file_ in _find_config_files():
        print("  " + file_)

    print("\nCONFIGURATION:")
    for section in mesoed.config.sections():
        print(f"  [{section}]")
        for option in mesoed.config.options(section):
            print(f"  {option} = {mesoed.config.get(section, option)}")
        print("")


def _is_writable_dir(p):
    """
    Checks to see if a directory is writable.
    """
    # Worried about multiple threads creating the directory at the same time.
    try:
        Path(p).mkdir(parents=True, exist_ok=True)
    except FileExistsError:  # raised if there's an existing file instead of a directory
        return False
    else:
        return Path(p).is_dir() and os.access(p, os.W_OK)


def _get_user_configdir():
    """
    Return the string representing the configuration dir.

    The default is set by "AppDirs" and can be accessed by importing
    ``mesoed.util.config.CONFIG_DIR``. You can override this with the
    "MESOED_CONFIGDIR" environment variable.
    """
    configdir = os.environ.get("MESOED_CONFIGDIR", CONFIG_DIR)

    if not _is_writable_dir(configdir):
        raise RuntimeError(f'Could not write to MESOED_CONFIGDIR="{configdir}"')
    return configdir


def copy_default_config(overwrite=False):
    """
    Copies the default config file to the user's config directory.

    Parameters
    ----------
    overwrite : `bool`
        If True, existing config file will be overwritten.
    """
    config_file = Path(mesoed.__file__).parent / "data" / CONFIG_FILENAME
    user_config_dir = Path(_get_user_configdir())
    user_config_file = user_config_dir / CONFIG_FILENAME

    if not _is_writable_dir(user_config_dir):
        raise RuntimeError(f"Could not write to config directory {user_config_dir}")

    if user_config_file.exists():
        if overwrite:
            message = (
                "User config file already exists. "
                "This will be overwritten with a backup written in the same location."
            )
            warn_user(message)
            os.rename(str(user_config_file), str(user_config_file) + ".bak")
            shutil.copyfile(config_file, user_config_file)
        else:
            message = (
                "User config file already exists. "
                "To overwrite it use `copy_default_config(overwrite=True)`"
            )
            warn_user(message)
    else:
        shutil.copyfile(config_file, user_config_file)
