"""
This module provides general utility functions.
"""
import hashlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

import mesoed

__all__ = [
    "RandomStreams",
    "replication_chunks",
    "map_chunks",
    "get_numeric",
    "is_power_of_two",
    "max_standard_errors",
]

# Philox counters are 256 bit; the replication id occupies the upper half so
# that draws within one replication never run into the next one.
COUNTER_SHIFT = 128


def get_numeric(option, fallback=None):
    """
    Return a floating point option from the ``[numerics]`` config section.

    Parameters
    ----------
    option : `str`
        The option name, e.g. ``"psd_tolerance"``.
    fallback : `float`, optional
        Value returned when the option is not set.

    Returns
    -------
    value : `float`
    """
    return mesoed.config.getfloat("numerics", option, fallback=fallback)


def is_power_of_two(n):
    """Return True if ``n`` is a positive integer power of two."""
    n = int(n)
    return n > 0 and (n & (n - 1)) == 0


def max_standard_errors(difference, error, atol=0.0):
    """
    Largest deviation measured in standard errors.

    Entries with zero standard error count as zero when the deviation is at
    most ``atol`` and as infinite otherwise.

    Parameters
    ----------
    difference : array_like
        Deviations between an estimate and a reference.
    error : array_like
        Standard errors, broadcastable to ``difference``.
    atol : `float`, optional
        Deviation tolerated where the error vanishes.

    Returns
    -------
    sigma : `float`
    """
    difference, error = np.broadcast_arrays(np.abs(difference), np.asarray(error, dtype=float))
    if difference.size == 0:
        return 0.0
    exact = np.where(difference > atol, np.inf, 0.0)
    scaled = np.divide(difference, error, out=exact, where=error > 0)
    return float(np.max(scaled))


class RandomStreams:
    """
    Counter-based random streams keyed by device identity and replication.

    Every ``(seed, device_id, replication)`` triple maps to its own
    `numpy.random.Philox` stream. The key is derived from a SHA-256 digest of
    the seed and the device id, the replication index sets the high word of
    the counter. Adding or removing a device therefore never shifts the
    streams of any other device, and a replication can be regenerated in
    isolation.

    Parameters
    ----------
    seed : `int`
        The global seed of a run.

    Examples
    --------
    >>> from mesoed.util.util import RandomStreams
    >>> streams = RandomStreams(1234)
    >>> a = streams.generator("source", 7).standard_normal(3)
    >>> b = streams.generator("source", 7).standard_normal(3)
    >>> bool((a == b).all())
    True
    """

    def __init__(self, seed):
        seed = int(seed)
        if seed < 0:
            raise ValueError(f"Seed must be non-negative, got {seed}.")
        self._seed = seed

    @property
    def seed(self):
        """(`int`) The global seed."""
        return self._seed

    def key(self, device_id):
        """
        Return the 128-bit Philox key of a device.

        Parameters
        ----------
        device_id : `str`
            The stable identifier of the device.

        Returns
        -------
        key : `int`
        """
        digest = hashlib.sha256(f"{self._seed}:{device_id}".encode("utf-8")).digest()
        return int.from_bytes(digest[:16], "big", signed=False)

    def generator(self, device_id, replication):
        """
        Return a fresh generator for one device and one replication.

        Parameters
        ----------
        device_id : `str`
            The stable identifier of the device.
        replication : `int`
            The replication index, starting at zero.

        Returns
        -------
        generator : `numpy.random.Generator`
        """
        replication = int(replication)
        if replication < 0:
            raise ValueError(f"Replication index must be non-negative, got {replication}.")
        bit_generator = np.random.Philox(
            key=self.key(device_id), counter=replication << COUNTER_SHIFT
        )
        return np.random.Generator(bit_generator)

    def __repr__(self):
        return f"RandomStreams(seed={self._seed})"


def replication_chunks(replications, chunk_size=None):
    """
    Split replication indices into consecutive batches.

    Parameters
    ----------
    replications : `int` or sequence of `int`
        Either the number of replications (indices ``0 .. n-1``) or an
        explicit sequence of replication indices.
    chunk_size : `int`, optional
        Replications per batch. Defaults to ``[simulation] chunk_size``.

    Returns
    -------
    chunks : `list[range]` or `list[list[int]]`
        Batches in replication order.
    """
    if chunk_size is None:
        chunk_size = mesoed.config.getint("simulation", "chunk_size", fallback=2048)
    chunk_size = int(chunk_size)
    if chunk_size < 1:
        raise ValueError(f"Chunk size must be at least 1, got {chunk_size}.")
    if isinstance(replications, (int, np.integer)):
        if replications < 1:
            raise ValueError(f"Number of replications must be positive, got {replications}.")
        replications = range(int(replications))
    replications = list(replications)
    return [
        replications[start : start + chunk_size]
        for start in range(0, len(replications), chunk_size)
    ]


def map_chunks(func, chunks, threads=1):
    """
    Apply ``func`` to every chunk and return the results in chunk order.

    Parameters
    ----------
    func : callable
        Called as ``func(chunk)``.
    chunks : `list`
        Batches from `replication_chunks`.
    threads : `int`
        Number of worker threads. One thread runs the batches inline.

    Returns
    -------
    results : `list`
        One result per chunk, in the order of ``chunks``.
    """
    if threads <= 1 or len(chunks) <= 1:
        return [func(chunk) for chunk in chunks]
    mesoed.log.debug(f"Running {len(chunks)} replication batches on {threads} threads.")
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(func, chunks))
