"""
Discretized time and mode bookkeeping.

Every physical quantity of a run lives on a `TimeGrid`: a uniform grid of
``n_steps`` time points times ``n_modes`` field modes. Integrals over time
are left-point sums, ``dt * sum``, and kernels act on the flattened
``step * n_modes + mode`` index.
"""
import numpy as np
from astropy import units as u
from astropy.table import Table

from mesoed.util.util import is_power_of_two

__all__ = [
    "TimeGrid",
    "Trajectory",
    "CausalKernel",
    "inner",
    "apply_kernel",
    "bilinear",
    "compose_kernels",
    "superpose",
]

# Relative tolerance for looking up an on-grid time
ON_GRID_RTOL = 1e-9


def _to_seconds(value, name):
    if isinstance(value, u.Quantity):
        try:
            value = value.to_value(u.s)
        except u.UnitConversionError:
            raise ValueError(f"{name} must be convertible to seconds, got unit {value.unit}.")
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}.")
    return value


def _positive_int(value, name):
    if isinstance(value, bool) or int(value) != value:
        raise ValueError(f"{name} must be an integer, got {value!r}.")
    value = int(value)
    if value < 1:
        raise ValueError(f"{name} must be at least 1, got {value}.")
    return value


class TimeGrid:
    """
    A uniform time grid carrying one or more field modes.

    Parameters
    ----------
    dt : `float` or `~astropy.units.Quantity`
        The time step in seconds. Must be positive.
    n_steps : `int`
        Number of time steps.
    n_modes : `int`, optional
        Number of field modes, default 1.
    t0 : `float` or `~astropy.units.Quantity`, optional
        Time of step zero in seconds, default 0.

    Examples
    --------
    >>> import astropy.units as u
    >>> from mesoed.timegrid import TimeGrid
    >>> grid = TimeGrid(dt=500 * u.ms, n_steps=10)
    >>> grid.time(3)
    1.5
    """

    def __init__(self, dt, n_steps, n_modes=1, t0=0.0):
        self._dt = _to_seconds(dt, "dt")
        if self._dt <= 0:
            raise ValueError(f"dt must be positive, got {self._dt}.")
        self._t0 = _to_seconds(t0, "t0")
        self._n_steps = _positive_int(n_steps, "n_steps")
        self._n_modes = _positive_int(n_modes, "n_modes")

    @property
    def dt(self):
        """(`float`) The time step in seconds."""
        return self._dt

    @property
    def t0(self):
        """(`float`) The time of step zero in seconds."""
        return self._t0

    @property
    def n_steps(self):
        """(`int`) The number of time steps."""
        return self._n_steps

    @property
    def n_modes(self):
        """(`int`) The number of field modes."""
        return self._n_modes

    @property
    def size(self):
        """(`int`) Length of a flattened trajectory, ``n_steps * n_modes``."""
        return self._n_steps * self._n_modes

    @property
    def shape(self):
        """(`tuple`) Shape of a trajectory, ``(n_steps, n_modes)``."""
        return (self._n_steps, self._n_modes)

    @property
    def times(self):
        """(`numpy.ndarray`) Times of all steps in seconds."""
        return self._t0 + np.arange(self._n_steps) * self._dt

    @property
    def duration(self):
        """(`float`) Total length ``n_steps * dt`` of the grid in seconds."""
        return self._n_steps * self._dt

    @property
    def is_power_of_two(self):
        """(`bool`) Whether ``n_steps`` is a power of two."""
        return is_power_of_two(self._n_steps)

    def time(self, step):
        """Return the time of ``step`` in seconds."""
        return self._t0 + step * self._dt

    def step_index(self, t):
        """
        Return the step whose time is ``t``.

        Parameters
        ----------
        t : `float` or `~astropy.units.Quantity`
            A time on the grid.

        Returns
        -------
        step : `int`

        Raises
        ------
        ValueError: If ``t`` does not fall on a grid point.
        """
        t = _to_seconds(t, "t")
        position = (t - self._t0) / self._dt
        step = int(round(position))
        if abs(position - step) > ON_GRID_RTOL * max(1.0, abs(position)) or not (
            0 <= step < self._n_steps
        ):
            raise ValueError(f"Time {t} s is not on the grid {self!r}.")
        return step

    def flat_index(self, step, mode=0):
        """Return the flattened index of ``(step, mode)``."""
        if not (0 <= step < self._n_steps):
            raise IndexError(f"Step {step} out of range for {self._n_steps} steps.")
        if not (0 <= mode < self._n_modes):
            raise IndexError(f"Mode {mode} out of range for {self._n_modes} modes.")
        return step * self._n_modes + mode

    def with_modes(self, n_modes):
        """Return a grid with the same time axis and ``n_modes`` modes."""
        return TimeGrid(self._dt, self._n_steps, n_modes=n_modes, t0=self._t0)

    def check_same(self, other, name="argument"):
        """
        Raise a `ValueError` if ``other`` is not the same grid.
        """
        if self != other:
            raise ValueError(f"Grid mismatch: {name} lives on {other!r}, expected {self!r}.")

    def _key(self):
        return (self._t0, self._dt, self._n_steps, self._n_modes)

    def __eq__(self, other):
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return (
            f"TimeGrid(dt={self._dt!r}, n_steps={self._n_steps}, "
            f"n_modes={self._n_modes}, t0={self._t0!r})"
        )


class Trajectory:
    """
    A real time series of currents or fields on a `TimeGrid`.

    Parameters
    ----------
    grid : `TimeGrid`
        The grid the values live on.
    values : array_like
        Values indexed ``[step][mode]``. A one-dimensional array is accepted
        for single-mode grids.

    Raises
    ------
    ValueError: If the shape does not match the grid or a value is not finite.
    """

    def __init__(self, grid, values):
        if not isinstance(grid, TimeGrid):
            raise TypeError(f"grid must be a TimeGrid, got {type(grid).__name__}.")
        values = np.array(values, dtype=float)
        if values.ndim == 1 and grid.n_modes == 1:
            values = values.reshape(-1, 1)
        if values.shape != grid.shape:
            raise ValueError(f"Trajectory values have shape {values.shape}, expected {grid.shape}.")
        if not np.all(np.isfinite(values)):
            raise ValueError("Trajectory values must all be finite.")
        values.flags.writeable = False
        self._grid = grid
        self._values = values

    @classmethod
    def zeros(cls, grid):
        """A trajectory that vanishes everywhere."""
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid, value):
        """A trajectory equal to ``value`` at every step and mode."""
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def impulse(cls, grid, step, mode=0, amplitude=1.0):
        """A trajectory equal to ``amplitude`` at ``(step, mode)`` and zero elsewhere."""
        values = np.zeros(grid.shape)
        values[step, mode] = amplitude
        return cls(grid, values)

    @classmethod
    def from_function(cls, grid, func):
        """
        Sample ``func`` on the grid.

        ``func`` receives the array of step times and returns an array of
        shape ``(n_steps,)`` (broadcast to all modes) or ``(n_steps, n_modes)``.
        """
        values = np.asarray(func(grid.times), dtype=float)
        if values.ndim == 1:
            values = np.repeat(values[:, None], grid.n_modes, axis=1)
        return cls(grid, values)

    @classmethod
    def from_flat(cls, grid, flat):
        """Build a trajectory from its flattened ``step * n_modes + mode`` form."""
        return cls(grid, np.asarray(flat, dtype=float).reshape(grid.shape))

    @property
    def grid(self):
        """(`TimeGrid`) The grid of the trajectory."""
        return self._grid

    @property
    def values(self):
        """(`numpy.ndarray`) Read-only values of shape ``(n_steps, n_modes)``."""
        return self._values

    @property
    def flat(self):
        """(`numpy.ndarray`) Values in flattened ``step * n_modes + mode`` order."""
        return self._values.reshape(-1)

    @property
    def shape(self):
        """(`tuple`) The shape ``(n_steps, n_modes)``."""
        return self._values.shape

    def to_table(self, name="value"):
        """
        Return the trajectory as an `~astropy.table.Table`.

        The table has a ``time`` column in seconds and one column per mode.
        """
        table = Table()
        table["time"] = self._grid.times * u.s
        for mode in range(self._grid.n_modes):
            table[f"{name}_{mode}"] = self._values[:, mode]
        return table

    def _coerce(self, other):
        if isinstance(other, Trajectory):
            self._grid.check_same(other.grid, "other trajectory")
            return other.values
        return NotImplemented

    def __add__(self, other):
        values = self._coerce(other)
        if values is NotImplemented:
            return NotImplemented
        return Trajectory(self._grid, self._values + values)

    def __sub__(self, other):
        values = self._coerce(other)
        if values is NotImplemented:
            return NotImplemented
        return Trajectory(self._grid, self._values - values)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return Trajectory(self._grid, self._values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return Trajectory(self._grid, -self._values)

    def __len__(self):
        return self._grid.n_steps

    def __getitem__(self, item):
        return self._values[item]

    def __repr__(self):
        return f"Trajectory(grid={self._grid!r})"

    def __str__(self):
        return str(self.to_table())


class CausalKernel:
    """
    A causal response kernel ``K[(n, k)][(m, k')]`` on a `TimeGrid`.

    Kernels act on trajectories with the left-point rule,
    ``(K g)[n] = dt * sum_m K[n][m] g[m]``. A strict kernel vanishes whenever
    ``m >= n``: a source at step ``m`` acts only at later steps. A
    same-time-allowed kernel vanishes whenever ``m > n``; these describe the
    response of a current to the field at the same step.

    Parameters
    ----------
    grid : `TimeGrid`
        The grid the kernel acts on.
    values : array_like
        Either a ``(size, size)`` matrix in flattened index order or a
        ``(n_steps, n_modes, n_steps, n_modes)`` tensor.
    strict : `bool`, optional
        Whether same-time entries are forbidden, default True.
    check : `bool`, optional
        Verify that every acausal entry is zero, default True. Only
        negative-control fixtures switch this off.

    Raises
    ------
    ValueError: If the shape does not match the grid or, when ``check`` is
        set, an entry violates the requested causality.
    """

    STRICT = "strict"
    SAME_TIME_ALLOWED = "same-time-allowed"

    def __init__(self, grid, values, strict=True, check=True):
        if not isinstance(grid, TimeGrid):
            raise TypeError(f"grid must be a TimeGrid, got {type(grid).__name__}.")
        values = np.array(values, dtype=float)
        if values.ndim == 4:
            if values.shape != grid.shape + grid.shape:
                raise ValueError(
                    f"Kernel tensor has shape {values.shape}, expected {grid.shape + grid.shape}."
                )
            values = values.reshape(grid.size, grid.size)
        if values.shape != (grid.size, grid.size):
            raise ValueError(
                f"Kernel matrix has shape {values.shape}, expected {(grid.size, grid.size)}."
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("Kernel values must all be finite.")
        self._grid = grid
        self._strict = bool(strict)
        if check and np.any(values[self.acausal_mask(grid, self._strict)] != 0):
            raise ValueError(
                f"Kernel has nonzero entries at acausal positions for a {self.strictness} kernel."
            )
        values.flags.writeable = False
        self._values = values

    @staticmethod
    def acausal_mask(grid, strict=True):
        """
        Return the boolean mask of entries a causal kernel must leave zero.

        Parameters
        ----------
        grid : `TimeGrid`
        strict : `bool`
            Whether the same-time entries are included in the mask.

        Returns
        -------
        mask : `numpy.ndarray`
            Boolean array of shape ``(size, size)``.
        """
        steps = np.repeat(np.arange(grid.n_steps), grid.n_modes)
        if strict:
            return steps[None, :] >= steps[:, None]
        return steps[None, :] > steps[:, None]

    @classmethod
    def zeros(cls, grid, strict=True):
        """A kernel that vanishes everywhere."""
        return cls(grid, np.zeros((grid.size, grid.size)), strict=strict)

    @classmethod
    def local(cls, grid, coupling):
        """
        A same-time response ``J[n] = coupling @ A[n]``.

        Parameters
        ----------
        grid : `TimeGrid`
        coupling : `float` or array_like
            A scalar or an ``(n_modes, n_modes)`` matrix acting on the modes.

        Returns
        -------
        kernel : `CausalKernel`
            A same-time-allowed kernel with ``coupling / dt`` on its diagonal
            blocks.
        """
        coupling = np.asarray(coupling, dtype=float)
        if coupling.ndim == 0:
            coupling = coupling * np.eye(grid.n_modes)
        if coupling.shape != (grid.n_modes, grid.n_modes):
            raise ValueError(
                f"Coupling has shape {coupling.shape}, expected {(grid.n_modes, grid.n_modes)}."
            )
        values = np.kron(np.eye(grid.n_steps), coupling) / grid.dt
        return cls(grid, values, strict=False)

    @classmethod
    def block_diagonal(cls, grid, kernels):
        """
        Assemble a mode-diagonal kernel from one single-mode kernel per mode.

        Parameters
        ----------
        grid : `TimeGrid`
            The multimode grid.
        kernels : `list` of `CausalKernel`
            Single-mode kernels on the same time axis, one per mode.

        Returns
        -------
        kernel : `CausalKernel`
            Strict if every input kernel is strict.
        """
        if len(kernels) != grid.n_modes:
            raise ValueError(f"Expected {grid.n_modes} single-mode kernels, got {len(kernels)}.")
        tensor = np.zeros(grid.shape + grid.shape)
        for mode, kernel in enumerate(kernels):
            grid.with_modes(1).check_same(kernel.grid, f"kernel for mode {mode}")
            tensor[:, mode, :, mode] = kernel.values
        return cls(grid, tensor, strict=all(kernel.strict for kernel in kernels))

    @property
    def grid(self):
        """(`TimeGrid`) The grid of the kernel."""
        return self._grid

    @property
    def values(self):
        """(`numpy.ndarray`) Read-only ``(size, size)`` matrix in flattened order."""
        return self._values

    @property
    def tensor(self):
        """(`numpy.ndarray`) The kernel as a ``(n_steps, n_modes, n_steps, n_modes)`` view."""
        return self._values.reshape(self._grid.shape + self._grid.shape)

    @property
    def strict(self):
        """(`bool`) Whether same-time entries are forbidden."""
        return self._strict

    @property
    def strictness(self):
        """(`str`) Either ``"strict"`` or ``"same-time-allowed"``."""
        return self.STRICT if self._strict else self.SAME_TIME_ALLOWED

    @property
    def has_same_time_terms(self):
        """(`bool`) Whether any diagonal block is nonzero."""
        steps = np.repeat(np.arange(self._grid.n_steps), self._grid.n_modes)
        return bool(np.any(self._values[steps[:, None] == steps[None, :]] != 0))

    @property
    def is_zero(self):
        """(`bool`) Whether every entry vanishes."""
        return not np.any(self._values)

    def is_causal(self, strict=None):
        """
        Check the entries against a causality rule.

        Parameters
        ----------
        strict : `bool`, optional
            The rule to check, defaults to the kernel's own strictness.

        Returns
        -------
        causal : `bool`
        """
        strict = self._strict if strict is None else strict
        return not np.any(self._values[self.acausal_mask(self._grid, strict)] != 0)

    def block(self, step, step2):
        """Return the ``(n_modes, n_modes)`` block coupling ``step2`` into ``step``."""
        n_modes = self._grid.n_modes
        return self._values[
            step * n_modes : (step + 1) * n_modes, step2 * n_modes : (step2 + 1) * n_modes
        ]

    def row_apply(self, step, history):
        """
        Evaluate row ``step`` of the kernel against a batch of trajectories.

        Parameters
        ----------
        step : `int`
            The step to evaluate.
        history : `numpy.ndarray`
            Batch of shape ``(n_reps, n_steps, n_modes)``.

        Returns
        -------
        row : `numpy.ndarray`
            Shape ``(n_reps, n_modes)``, equal to ``dt * sum_m K[step][m] history[m]``.
        """
        n_modes = self._grid.n_modes
        rows = self._values[step * n_modes : (step + 1) * n_modes]
        flat = history.reshape(history.shape[0], -1)
        return self._grid.dt * np.einsum("rj,ij->ri", flat, rows)

    def apply(self, batch):
        """
        Apply the kernel to a batch of trajectories.

        Parameters
        ----------
        batch : `numpy.ndarray`
            Shape ``(n_reps, n_steps, n_modes)``.

        Returns
        -------
        out : `numpy.ndarray`
            Same shape as ``batch``.
        """
        flat = batch.reshape(batch.shape[0], -1)
        out = self._grid.dt * np.einsum("rj,ij->ri", flat, self._values)
        return out.reshape(batch.shape)

    def __repr__(self):
        return f"CausalKernel(grid={self._grid!r}, strictness={self.strictness!r})"


def inner(f, g):
    """
    The time integral ``dt * sum_n sum_k f[n, k] g[n, k]``.

    Parameters
    ----------
    f, g : `Trajectory`
        Trajectories on the same grid.

    Returns
    -------
    value : `float`

    Examples
    --------
    >>> from mesoed.timegrid import TimeGrid, Trajectory, inner
    >>> grid = TimeGrid(dt=0.1, n_steps=10)
    >>> round(inner(Trajectory.constant(grid, 1.0), Trajectory.constant(grid, 1.0)), 12)
    1.0
    """
    f.grid.check_same(g.grid, "g")
    return float(f.grid.dt * np.sum(f.values * g.values))


def apply_kernel(kernel, g):
    """
    Apply a kernel to a trajectory, ``out[n] = dt * sum_m K[n][m] g[m]``.

    Parameters
    ----------
    kernel : `CausalKernel`
    g : `Trajectory`

    Returns
    -------
    out : `Trajectory`
    """
    kernel.grid.check_same(g.grid, "trajectory")
    out = kernel.grid.dt * (kernel.values @ g.flat)
    return Trajectory.from_flat(g.grid, out)


def bilinear(f, kernel, g):
    """
    The bilinear form ``inner(f, apply_kernel(kernel, g))``.
    """
    return inner(f, apply_kernel(kernel, g))


def compose_kernels(first, second):
    """
    The dt-weighted kernel product ``(K1 K2)[n][m] = dt * sum_p K1[n][p] K2[p][m]``.

    The product is strict if either factor is strict.
    """
    first.grid.check_same(second.grid, "second kernel")
    values = first.grid.dt * (first.values @ second.values)
    return CausalKernel(first.grid, values, strict=first.strict or second.strict)


def superpose(terms):
    """
    Sum field contributions independently of the order they are given in.

    Terms are broadcast against each other, sorted elementwise and then added
    from the smallest to the largest. Any permutation of ``terms`` therefore
    yields a bit-identical result.

    Parameters
    ----------
    terms : `list` of array_like
        Contributions with mutually broadcastable shapes.

    Returns
    -------
    total : `numpy.ndarray`
    """
    arrays = np.broadcast_arrays(*[np.asarray(term, dtype=float) for term in terms])
    if len(arrays) == 1:
        return np.array(arrays[0])
    ordered = np.sort(np.stack(arrays), axis=0)
    total = ordered[0].copy()
    for part in ordered[1:]:
        total += part
    return total
