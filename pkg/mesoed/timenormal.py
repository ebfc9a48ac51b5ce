"""
Frequency parts and time-normal moments of free field modes.

A real signal splits into its positive- and negative-frequency parts,
``f = f(+) + f(-)`` with ``f(-) = conj(f(+))``. The positive part carries the
``exp(-i omega t)`` components. Time-normal ordering places negative-frequency
operator parts to the left in anti-chronological order and positive parts to
the right in chronological order. Its averages are the moments a classical
random field has to reproduce, which is checked here for Gaussian states of
one free mode against truncated Fock-space operators.

The split is done by masking discrete Fourier bins, so it is exact only for
frequencies that fall on a bin. `oracle_grid` builds such grids.
"""
import numpy as np
from scipy import fft
from scipy.special import gammaln

from mesoed import log
from mesoed.devices import estimate_moments
from mesoed.propagators import annihilation_operator, mode_operator_series
from mesoed.timegrid import TimeGrid, Trajectory
from mesoed.util.exceptions import warn_accuracy
from mesoed.util.util import RandomStreams, get_numeric, is_power_of_two, max_standard_errors

__all__ = [
    "ComplexTrajectory",
    "FockOracle",
    "ClassicalDoppelganger",
    "PFunctionalMatch",
    "freq_split",
    "frequency_filter_matrix",
    "acausal_weight",
    "oracle_grid",
    "time_normal_second_moment",
    "pfunctional_match",
]

STATES = ("vacuum", "coherent", "thermal")

# Largest imaginary residue tolerated in a Hermitian moment
IMAGINARY_TOLERANCE = 1e-10


class ComplexTrajectory:
    """
    A complex-valued trajectory on a grid.

    Parameters
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
    values : array_like
        Complex values of shape ``(n_steps, n_modes)``; a flat array is
        accepted on single-mode grids.
    """

    def __init__(self, grid, values):
        values = np.array(values, dtype=complex)
        if values.ndim == 1 and grid.n_modes == 1:
            values = values[:, None]
        if values.shape != grid.shape:
            raise ValueError(f"Values have shape {values.shape}, expected {grid.shape}.")
        if not np.all(np.isfinite(values)):
            raise ValueError("Trajectory values must be finite.")
        values.flags.writeable = False
        self._grid = grid
        self._values = values

    @property
    def grid(self):
        """(`~mesoed.timegrid.TimeGrid`) The grid."""
        return self._grid

    @property
    def values(self):
        """(`numpy.ndarray`) Complex values, shape ``(n_steps, n_modes)``."""
        return self._values

    @property
    def real(self):
        """(`~mesoed.timegrid.Trajectory`) The real part."""
        return Trajectory(self._grid, self._values.real)

    @property
    def imag(self):
        """(`~mesoed.timegrid.Trajectory`) The imaginary part."""
        return Trajectory(self._grid, self._values.imag)

    def conj(self):
        """Return the complex conjugate trajectory."""
        return ComplexTrajectory(self._grid, np.conj(self._values))

    def __add__(self, other):
        if isinstance(other, (ComplexTrajectory, Trajectory)):
            self._grid.check_same(other.grid, "other")
            other = other.values
        return ComplexTrajectory(self._grid, self._values + other)

    __radd__ = __add__

    def __len__(self):
        return self._grid.n_steps

    def __getitem__(self, item):
        return self._values[item]

    def __repr__(self):
        return f"ComplexTrajectory(grid={self._grid!r})"


# ================================================================================================
#                                   FREQUENCY SPLIT
# ================================================================================================


def _split_weights(n, sign):
    """Fourier-bin weights selecting the positive (``sign=+1``) or negative frequency part."""
    frequencies = fft.fftfreq(n)
    # numpy bins with negative frequency hold exp(-i omega t) components
    positive = np.where(frequencies < 0, 1.0, 0.0)
    positive[0] = 0.5
    if n % 2 == 0:
        positive[n // 2] = 0.5
    return positive if sign > 0 else 1.0 - positive


def _check_length(n):
    if not is_power_of_two(n):
        raise ValueError(f"The frequency split needs a power-of-two number of steps, got {n}.")


def _split_array(values, axis=0):
    values = np.asarray(values)
    n = values.shape[axis]
    _check_length(n)
    shape = [1] * values.ndim
    shape[axis] = n
    spectrum = fft.fft(values, axis=axis)
    plus = fft.ifft(spectrum * _split_weights(n, +1).reshape(shape), axis=axis)
    minus = fft.ifft(spectrum * _split_weights(n, -1).reshape(shape), axis=axis)
    return plus, minus


def freq_split(f):
    """
    Split a real trajectory into its positive and negative frequency parts.

    The zero-frequency bin, and for even lengths the Nyquist bin, is shared
    equally between both parts.

    Parameters
    ----------
    f : `~mesoed.timegrid.Trajectory`
        Real trajectory with a power-of-two number of steps.

    Returns
    -------
    f_plus, f_minus : `ComplexTrajectory`
        ``f_plus + f_minus == f`` and ``f_minus == conj(f_plus)``.

    Raises
    ------
    ValueError: If the number of steps is not a power of two.

    Examples
    --------
    >>> import numpy as np
    >>> from mesoed.timegrid import TimeGrid, Trajectory
    >>> from mesoed.timenormal import freq_split
    >>> grid = TimeGrid(dt=1.0, n_steps=8)
    >>> plus, minus = freq_split(Trajectory(grid, np.ones(8)))
    >>> bool(np.allclose(plus.values, 0.5))
    True
    """
    plus, minus = _split_array(f.values, axis=0)
    return ComplexTrajectory(f.grid, plus), ComplexTrajectory(f.grid, minus)


def frequency_filter_matrix(grid, sign=+1):
    """
    The frequency filter as a dense matrix over time steps.

    ``frequency_filter_matrix(grid, +1) @ f`` is the positive frequency part
    of a single-mode signal ``f``.

    Parameters
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
    sign : `int`, optional
        ``+1`` for the positive part, ``-1`` for the negative part.

    Returns
    -------
    matrix : `numpy.ndarray`
        Complex ``(n_steps, n_steps)`` circulant matrix.
    """
    if sign not in (+1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}.")
    n = grid.n_steps
    _check_length(n)
    identity = np.eye(n)
    return fft.ifft(_split_weights(n, sign)[:, None] * fft.fft(identity, axis=0), axis=0)


def acausal_weight(grid):
    """
    Relative weight of the future in the positive-frequency filter.

    The filter output at step ``n`` depends on the input at later steps; this
    returns the Frobenius norm of the strictly upper triangle of
    `frequency_filter_matrix` relative to the norm of the whole matrix.

    Parameters
    ----------
    grid : `~mesoed.timegrid.TimeGrid`

    Returns
    -------
    weight : `float`
        Between 0 and 1; zero would mean a causal filter.
    """
    matrix = frequency_filter_matrix(grid, +1)
    return float(np.linalg.norm(np.triu(matrix, k=1)) / np.linalg.norm(matrix))


def oracle_grid(mode, periods=8, steps_per_period=8):
    """
    A grid on which the frequency of ``mode`` is a Fourier bin.

    Parameters
    ----------
    mode : `~mesoed.propagators.ModeSpec`
    periods : `int`, optional
        Number of oscillation periods covered, default 8.
    steps_per_period : `int`, optional
        Default 8.

    Returns
    -------
    grid : `~mesoed.timegrid.TimeGrid`
        Single-mode grid of ``periods * steps_per_period`` steps.
    """
    n_steps = int(periods) * int(steps_per_period)
    _check_length(n_steps)
    return TimeGrid(dt=mode.period / steps_per_period, n_steps=n_steps)


# ================================================================================================
#                                   FOCK ORACLE
# ================================================================================================


def _coherent_amplitudes(alpha, n_max):
    if alpha == 0:
        amplitudes = np.zeros(n_max, dtype=complex)
        amplitudes[0] = 1.0
        return amplitudes
    n = np.arange(n_max)
    log_modulus = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(log_modulus + 1j * n * np.angle(alpha))


def _thermal_populations(nbar, n_max):
    if nbar == 0:
        populations = np.zeros(n_max)
        populations[0] = 1.0
        return populations
    ratio = nbar / (1.0 + nbar)
    return ratio ** np.arange(n_max) / (1.0 + nbar)


class FockOracle:
    """
    A free field mode in a Gaussian state, in a truncated Fock space.

    Parameters
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
        Single-mode grid with a power-of-two number of steps.
    mode : `~mesoed.propagators.ModeSpec`
        A mode with ``omega > 0``.
    n_max : `int`, optional
        Number of retained Fock states, default 20.
    state : `str`, optional
        ``"vacuum"`` (default), ``"coherent"`` or ``"thermal"``.
    alpha : `complex`, optional
        Coherent amplitude.
    nbar : `float`, optional
        Mean thermal occupation.

    Notes
    -----
    Truncated states are renormalized. The discarded population is
    available as `truncation_error` and triggers a
    `~mesoed.util.exceptions.NumericalAccuracyWarning` above
    ``[numerics] fock_truncation_tolerance``.
    """

    def __init__(self, grid, mode, n_max=20, state="vacuum", alpha=0.0, nbar=0.0):
        if grid.n_modes != 1:
            raise ValueError(f"FockOracle needs a single-mode grid, got {grid.n_modes} modes.")
        _check_length(grid.n_steps)
        if mode.omega == 0:
            raise ValueError("FockOracle needs a mode with omega > 0.")
        if state not in STATES:
            raise ValueError(f"Unknown state {state!r}; expected one of {STATES}.")
        if nbar < 0:
            raise ValueError(f"nbar must be non-negative, got {nbar}.")
        self._grid = grid
        self._mode = mode
        self._n_max = int(n_max)
        self._state = state
        self._alpha = complex(alpha)
        self._nbar = float(nbar)
        self._rho, self._truncation_error = self._density_matrix()
        tolerance = get_numeric("fock_truncation_tolerance", 1e-8)
        if self._truncation_error > tolerance:
            warn_accuracy(
                f"Fock cutoff n_max={self._n_max} discards {self._truncation_error:.2e} of the "
                f"{state} state population; increase n_max."
            )
        series = mode_operator_series(grid, mode, self._n_max)
        self._plus, self._minus = _split_array(series, axis=0)
        lowering = annihilation_operator(self._n_max)
        analytic = (mode.amplitude * np.exp(-1j * mode.omega * grid.times))[:, None, None] * lowering
        self._leakage = float(np.max(np.abs(self._plus - analytic)))
        if self._leakage > IMAGINARY_TOLERANCE:
            log.debug(f"Frequency split of the mode operator leaks {self._leakage:.2e}.")
        self._moments = None

    def _density_matrix(self):
        if self._state == "vacuum":
            rho = np.zeros((self._n_max, self._n_max), dtype=complex)
            rho[0, 0] = 1.0
            return rho, 0.0
        if self._state == "coherent":
            amplitudes = _coherent_amplitudes(self._alpha, self._n_max)
            kept = float(np.sum(np.abs(amplitudes) ** 2))
            amplitudes = amplitudes / np.sqrt(kept)
            return np.outer(amplitudes, np.conj(amplitudes)), max(0.0, 1.0 - kept)
        populations = _thermal_populations(self._nbar, self._n_max)
        kept = float(np.sum(populations))
        return np.diag(populations / kept).astype(complex), max(0.0, 1.0 - kept)

    @property
    def grid(self):
        """(`~mesoed.timegrid.TimeGrid`) The time grid."""
        return self._grid

    @property
    def mode(self):
        """(`~mesoed.propagators.ModeSpec`) The field mode."""
        return self._mode

    @property
    def n_max(self):
        """(`int`) Fock cutoff."""
        return self._n_max

    @property
    def state(self):
        """(`str`) The state kind."""
        return self._state

    @property
    def alpha(self):
        """(`complex`) Coherent amplitude."""
        return self._alpha

    @property
    def nbar(self):
        """(`float`) Mean thermal occupation."""
        return self._nbar

    @property
    def rho(self):
        """(`numpy.ndarray`) The renormalized density matrix."""
        return self._rho

    @property
    def truncation_error(self):
        """(`float`) Population discarded by the cutoff."""
        return self._truncation_error

    @property
    def leakage_residual(self):
        """(`float`) Largest deviation of the filtered operator from ``a exp(-i omega t)``."""
        return self._leakage

    def _expectation(self, left, right):
        """``tr(rho L_n R_m)`` for every pair of steps."""
        return np.einsum("ij,njk,mki->nm", self._rho, left, right, optimize=True)

    def _complex_moments(self):
        if self._moments is None:
            steps = np.arange(self._grid.n_steps)
            later = steps[:, None] >= steps[None, :]
            pp = self._expectation(self._plus, self._plus)
            mm = self._expectation(self._minus, self._minus)
            mp = self._expectation(self._minus, self._plus)
            # chronological for positive parts, anti-chronological for negative parts
            chronological = np.where(later, pp, pp.T)
            anti = np.where(later, mm.T, mm)
            self._moments = chronological + anti + mp + mp.T
        return self._moments

    def first_moment(self, t=None):
        """
        The mean field ``tr(rho A(t))``.

        Parameters
        ----------
        t : `float`, optional
            Time on the grid. All steps when omitted.

        Returns
        -------
        mean : `float` or `numpy.ndarray`
        """
        values = np.einsum("ij,nji->n", self._rho, self._plus + self._minus)
        _check_real(values, "first moment")
        if t is None:
            return values.real
        return float(values.real[self._grid.step_index(t)])

    def moment_matrix(self):
        """
        Time-normal second moments for every pair of steps.

        Returns
        -------
        moments : `numpy.ndarray`
            Real symmetric ``(n_steps, n_steps)`` matrix.
        """
        moments = self._complex_moments()
        _check_real(moments, "time-normal moment")
        return moments.real

    def __repr__(self):
        return f"FockOracle(state={self._state!r}, n_max={self._n_max}, mode={self._mode!r})"


def _check_real(values, name):
    residue = float(np.max(np.abs(np.imag(values)))) if np.size(values) else 0.0
    if residue > IMAGINARY_TOLERANCE:
        warn_accuracy(f"The {name} has an imaginary residue of {residue:.2e}.")


def time_normal_second_moment(oracle, t, t2):
    """
    The time-normal moment ``<T:A(t) A(t2):>`` of a free mode.

    The four ordered terms are the chronological product of the positive
    parts, the anti-chronological product of the negative parts and both
    mixed products with the negative part on the left.

    Parameters
    ----------
    oracle : `FockOracle`
    t, t2 : `float`
        Times on the oracle grid.

    Returns
    -------
    moment : `float`
    """
    grid = oracle.grid
    value = oracle._complex_moments()[grid.step_index(t), grid.step_index(t2)]
    _check_real(value, "time-normal moment")
    return float(value.real)


# ================================================================================================
#                                   CLASSICAL DOPPELGANGER
# ================================================================================================


class ClassicalDoppelganger:
    """
    A classical random field reproducing the time-normal moments of a Gaussian state.

    ``A(t) = sqrt(hbar / 2 omega) (beta exp(-i omega t) + c.c.)`` with
    ``beta = 0`` for the vacuum, ``beta = alpha`` for a coherent state and a
    random-phase complex Gaussian with ``<|beta|**2> = nbar`` for a thermal
    state.

    Parameters
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
    mode : `~mesoed.propagators.ModeSpec`
    state : `str`, optional
    alpha : `complex`, optional
    nbar : `float`, optional
    """

    def __init__(self, grid, mode, state="vacuum", alpha=0.0, nbar=0.0):
        if state not in STATES:
            raise ValueError(f"Unknown state {state!r}; expected one of {STATES}.")
        self._grid = grid
        self._mode = mode
        self._state = state
        self._alpha = complex(alpha)
        self._nbar = float(nbar)

    @classmethod
    def from_oracle(cls, oracle):
        """The doppelganger of the state held by a `FockOracle`."""
        return cls(oracle.grid, oracle.mode, oracle.state, alpha=oracle.alpha, nbar=oracle.nbar)

    @property
    def grid(self):
        """(`~mesoed.timegrid.TimeGrid`) The time grid."""
        return self._grid

    @property
    def is_deterministic(self):
        """(`bool`) Whether every sample is the same field."""
        return self._state != "thermal" or self._nbar == 0

    def _amplitudes(self, n_samples, seed):
        if self._state == "vacuum":
            return np.zeros(n_samples, dtype=complex)
        if self._state == "coherent":
            return np.full(n_samples, self._alpha)
        draws = RandomStreams(seed).generator("doppelganger", 0).standard_normal((n_samples, 2))
        return np.sqrt(self._nbar / 2) * (draws[:, 0] + 1j * draws[:, 1])

    def sample(self, n_samples, seed=0):
        """
        Draw classical field trajectories.

        Parameters
        ----------
        n_samples : `int`
        seed : `int`, optional

        Returns
        -------
        samples : `numpy.ndarray`
            Shape ``(n_samples, n_steps, 1)``.
        """
        beta = self._amplitudes(int(n_samples), seed)
        phase = np.exp(-1j * self._mode.omega * self._grid.times)
        field = 2 * self._mode.amplitude * np.real(beta[:, None] * phase[None, :])
        return field[:, :, None]


class PFunctionalMatch:
    """
    Comparison of Fock-oracle moments with classical sample moments.

    Attributes
    ----------
    first_deviation : `float`
        Largest absolute deviation of the mean field.
    second_deviation : `float`
        Largest absolute deviation of the second moments.
    max_deviation : `float`
        The larger of the two.
    max_sigma : `float`
        Largest deviation in units of the sampling standard error; zero for
        deterministic doppelgangers that match.
    n_samples : `int`
    """

    def __init__(self, first_deviation, second_deviation, max_sigma, n_samples):
        self.first_deviation = first_deviation
        self.second_deviation = second_deviation
        self.max_deviation = max(first_deviation, second_deviation)
        self.max_sigma = max_sigma
        self.n_samples = n_samples

    def __repr__(self):
        return f"PFunctionalMatch(max_deviation={self.max_deviation!r}, max_sigma={self.max_sigma!r})"


def pfunctional_match(oracle, doppelganger=None, n_samples=100000, seed=0):
    """
    Compare time-normal moments with the moments of a classical field.

    Parameters
    ----------
    oracle : `FockOracle`
    doppelganger : `ClassicalDoppelganger`, optional
        Defaults to the doppelganger of the oracle's state.
    n_samples : `int`, optional
        Classical samples, default 100000. Deterministic doppelgangers use two.
    seed : `int`, optional

    Returns
    -------
    report : `PFunctionalMatch`
    """
    if doppelganger is None:
        doppelganger = ClassicalDoppelganger.from_oracle(oracle)
    oracle.grid.check_same(doppelganger.grid, "doppelganger")
    if doppelganger.is_deterministic:
        n_samples = 2
    samples = doppelganger.sample(n_samples, seed=seed)
    report = estimate_moments(samples, grid=oracle.grid, central=False)
    first = report.mean.values[:, 0] - oracle.first_moment()
    second = report.cov - oracle.moment_matrix()
    sigma = max(
        max_standard_errors(first, report.mean_std_err[:, 0], atol=1e-9),
        max_standard_errors(second, report.cov_std_err, atol=1e-9),
    )
    log.debug(f"P-functional match for {oracle!r}: {sigma:.2f} standard errors")
    return PFunctionalMatch(
        float(np.max(np.abs(first))), float(np.max(np.abs(second))), sigma, int(n_samples)
    )
