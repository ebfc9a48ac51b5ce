"""
This module provides errors/exceptions and warnings of general use.

Exceptions that are specific to a given module should **not** be here,
but rather in the particular module.

This code is based on that provided by SunPy see
    licenses/SUNPY.rst
"""
import warnings

__all__ = [
    "MesoedWarning",
    "MesoedUserWarning",
    "NumericalAccuracyWarning",
    "warn_user",
    "warn_accuracy",
]


class MesoedWarning(Warning):
    """
    The base warning class from which all mesoed warnings should inherit.

    Any warning inheriting from this class is handled by the mesoed
    logger. This warning should not be issued in normal code. Use
    "MesoedUserWarning" instead or a specific sub-class.
    """


class MesoedUserWarning(UserWarning, MesoedWarning):
    """
    The primary warning class for mesoed.

    Use this if you do not need a specific type of warning.
    """


class NumericalAccuracyWarning(MesoedUserWarning):
    """
    A warning class for results whose numerical accuracy is in doubt.

    Raised for noise-dominated finite differences, truncated Fock
    populations and spectral leakage of the frequency split.
    """


def warn_user(msg, stacklevel=1):
    """
    Raise a `MesoedUserWarning`.

    Parameters
    ----------
    msg : str
        Warning message.
    stacklevel : int
        This is interpreted relative to the call to this function,
        e.g. ``stacklevel=1`` (the default) sets the stack level in the
        code that calls this function.
    """
    warnings.warn(msg, MesoedUserWarning, stacklevel + 1)


def warn_accuracy(msg, stacklevel=1):
    """
    Raise a `NumericalAccuracyWarning`.

    Parameters
    ----------
    msg : str
        Warning message.
    stacklevel : int
        This is interpreted relative to the call to this function.
    """
    warnings.warn(msg, NumericalAccuracyWarning, stacklevel + 1)
