"""
Devices: causal conditional samplers of currents.

A device is characterised only by the statistics of the current it emits
given the local field it sees. Samplers advance one step at a time and at
step ``n`` may read the local field at steps ``0 .. n`` only. Each device
draws its randomness from its own counter-based stream, keyed by a stable
device id, so that two constructions driven by the same streams can be
compared bit for bit.
"""
from abc import ABC, abstractmethod

import numpy as np
from scipy import linalg
from scipy.stats import poisson

from mesoed import log
from mesoed.timegrid import CausalKernel, Trajectory, apply_kernel, superpose
from mesoed.util.util import get_numeric, replication_chunks

__all__ = [
    "LocalField",
    "BareDevice",
    "DeviceSampler",
    "GaussianDeviceSpec",
    "PoissonDetectorSpec",
    "MomentReport",
    "radiate",
    "draw_bare",
    "sample_bare",
    "estimate_moments",
    "check_classicality",
    "noise_factor",
]


# ================================================================================================
#                                   LOCAL FIELD
# ================================================================================================


class LocalField:
    """
    The local field seen by a batch of replications.

    The field is the superposition of a list of contributions (the external
    field and the fields radiated by individual sources). Contributions are
    shared arrays that the owning time loop fills step by step; `resolve`
    recomputes one step from them. Rows that have not been resolved yet hold
    the superposition of whatever the contributions contained when the field
    was built, which for radiated parts is zero.

    Parameters
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
    n_reps : `int`
        Number of replications in the batch.
    terms : `list` of `numpy.ndarray`
        Contributions broadcastable to ``(n_reps, n_steps, n_modes)``.
    """

    def __init__(self, grid, n_reps, terms):
        self._grid = grid
        self._n_reps = int(n_reps)
        self._shape = (self._n_reps,) + grid.shape
        self._terms = [np.broadcast_to(term, self._shape) for term in terms]
        self._values = np.array(np.broadcast_to(superpose(self._terms), self._shape))

    @property
    def grid(self):
        """(`~mesoed.timegrid.TimeGrid`) The grid of the field."""
        return self._grid

    @property
    def n_reps(self):
        """(`int`) Number of replications."""
        return self._n_reps

    @property
    def values(self):
        """(`numpy.ndarray`) The field, shape ``(n_reps, n_steps, n_modes)``."""
        return self._values

    @property
    def terms(self):
        """(`list`) The contributions, in the order they were attached."""
        return list(self._terms)

    def resolve(self, step):
        """Recompute the field at ``step`` from the current contributions."""
        self._values[:, step] = superpose([term[:, step] for term in self._terms])

    def extended(self, term):
        """
        Return a new field with one more contribution.

        The new field shares the contribution arrays of this one.
        """
        return LocalField(self._grid, self._n_reps, self._terms + [term])


# ================================================================================================
#                                   ABSTRACT DEVICE
# ================================================================================================


class DeviceSampler(ABC):
    """
    Per-batch sampling state of a device.

    A sampler is created for one batch of replications and is advanced with
    `step` for ``n = 0, 1, ..., n_steps - 1`` in order.
    """

    def __init__(self, n_reps):
        self.n_reps = int(n_reps)

    @abstractmethod
    def step(self, n, field):
        """
        Draw the current at step ``n``.

        Parameters
        ----------
        n : `int`
            The step to draw.
        field : `LocalField`
            The local field; rows ``0 .. n`` are resolved.

        Returns
        -------
        current : `numpy.ndarray`
            Shape ``(n_reps, n_modes)``.
        """
        pass


class BareDevice(ABC):
    """
    Abstract base class for devices characterised by ``p[J | A_loc]``.

    Parameters
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
    device_id : `str`
        Stable identifier. Keys the random stream of the device.
    """

    kind = "abstract"

    def __init__(self, grid, device_id):
        if not isinstance(device_id, str) or not device_id:
            raise ValueError(f"device_id must be a non-empty string, got {device_id!r}.")
        self._grid = grid
        self._device_id = device_id

    @property
    def grid(self):
        """(`~mesoed.timegrid.TimeGrid`) The grid of the device."""
        return self._grid

    @property
    def device_id(self):
        """(`str`) The stable identifier of the device."""
        return self._device_id

    @property
    def components(self):
        """(`tuple`) The elementary devices this device is made of."""
        return (self,)

    @property
    @abstractmethod
    def field_sensitive(self):
        """(`bool`) Whether the current depends on the local field at all."""
        pass

    @property
    @abstractmethod
    def same_time_response(self):
        """(`bool`) Whether the current at step ``n`` depends on the field at step ``n``."""
        pass

    @property
    @abstractmethod
    def emission_modes(self):
        """(`tuple`) Modes in which the device can emit a nonzero current."""
        pass

    @abstractmethod
    def sampler(self, streams, replications):
        """
        Create the sampling state for a batch of replications.

        Parameters
        ----------
        streams : `~mesoed.util.util.RandomStreams`
        replications : sequence of `int`
            Replication indices of the batch.

        Returns
        -------
        sampler : `DeviceSampler`
        """
        pass

    def __repr__(self):
        return f"{type(self).__name__}(device_id={self._device_id!r}, grid={self._grid!r})"


# ================================================================================================
#                                   GAUSSIAN DEVICE
# ================================================================================================


def noise_factor(cov, tolerance=None):
    """
    Return a factor ``L`` with ``L @ L.T == cov``.

    The Cholesky factor is used when ``cov`` is positive definite. Singular
    covariances fall back to an eigen-factor with eigenvalues clipped at zero.

    Parameters
    ----------
    cov : `numpy.ndarray`
        Symmetric covariance matrix.
    tolerance : `float`, optional
        Smallest accepted eigenvalue is ``-tolerance``. Defaults to
        ``[numerics] psd_tolerance``.

    Raises
    ------
    ValueError: If ``cov`` is not symmetric positive semidefinite.
    """
    if tolerance is None:
        tolerance = get_numeric("psd_tolerance", 1e-10)
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"Covariance must be a square matrix, got shape {cov.shape}.")
    if not np.allclose(cov, cov.T, rtol=0, atol=tolerance):
        raise ValueError("Covariance must be symmetric.")
    if not np.any(cov):
        return np.zeros_like(cov)
    try:
        return linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        eigenvalues, eigenvectors = linalg.eigh(cov)
        if eigenvalues.min() < -tolerance:
            raise ValueError(
                f"Covariance is not positive semidefinite: smallest eigenvalue {eigenvalues.min():.3e}."
            )
        log.debug("Covariance is singular, using a clipped eigen-factor.")
        return eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))


class GaussianSampler(DeviceSampler):
    """Batch sampler of a `GaussianDeviceSpec`."""

    def __init__(self, spec, streams, replications):
        replications = list(replications)
        super().__init__(len(replications))
        self._spec = spec
        grid = spec.grid
        if spec.is_noiseless:
            self._noise = np.zeros((self.n_reps,) + grid.shape)
        else:
            draws = np.stack(
                [
                    streams.generator(spec.device_id, rep).standard_normal(grid.size)
                    for rep in replications
                ]
            )
            self._noise = np.einsum("ij,rj->ri", spec.factor, draws).reshape(
                (self.n_reps,) + grid.shape
            )

    def step(self, n, field):
        current = np.broadcast_to(self._spec.mu0.values[n], (self.n_reps, self._spec.grid.n_modes))
        if self._spec.field_sensitive:
            current = current + self._spec.chi.row_apply(n, field.values)
        return current + self._noise[:, n]


class GaussianDeviceSpec(BareDevice):
    """
    A device whose current is Gaussian with a mean linear in the local field.

    ``J = mu0 + chi A_loc + xi`` with ``xi ~ N(0, noise_cov)``.

    Parameters
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
    mu0 : `~mesoed.timegrid.Trajectory` or array_like, optional
        Free-running mean current, default zero.
    chi : `~mesoed.timegrid.CausalKernel`, optional
        Response of the current to the local field, default zero. May act at
        the same step.
    noise_cov : array_like, optional
        ``(size, size)`` covariance of the current noise, default zero.
    device_id : `str`, optional

    Examples
    --------
    >>> from mesoed.timegrid import TimeGrid
    >>> from mesoed.devices import GaussianDeviceSpec
    >>> grid = TimeGrid(dt=0.1, n_steps=8)
    >>> device = GaussianDeviceSpec.white(grid, sigma=1.0, chi=0.5, device_id="a")
    >>> device.same_time_response
    True
    """

    kind = "gaussian"

    def __init__(self, grid, mu0=None, chi=None, noise_cov=None, device_id="gaussian"):
        super().__init__(grid, device_id)
        if mu0 is None:
            mu0 = Trajectory.zeros(grid)
        elif not isinstance(mu0, Trajectory):
            mu0 = Trajectory(grid, np.broadcast_to(np.asarray(mu0, dtype=float), grid.shape))
        grid.check_same(mu0.grid, "mu0")
        if chi is None:
            chi = CausalKernel.zeros(grid, strict=False)
        if not isinstance(chi, CausalKernel):
            raise TypeError(f"chi must be a CausalKernel, got {type(chi).__name__}.")
        grid.check_same(chi.grid, "chi")
        if noise_cov is None:
            noise_cov = np.zeros((grid.size, grid.size))
        noise_cov = np.array(noise_cov, dtype=float)
        if noise_cov.shape != (grid.size, grid.size):
            raise ValueError(
                f"noise_cov has shape {noise_cov.shape}, expected {(grid.size, grid.size)}."
            )
        self._mu0 = mu0
        self._chi = chi
        self._factor = noise_factor(noise_cov)
        noise_cov.flags.writeable = False
        self._noise_cov = noise_cov

    @classmethod
    def white(cls, grid, sigma, mu0=0.0, chi=0.0, modes=None, device_id="gaussian"):
        """
        A device with white noise and a same-time local response.

        Parameters
        ----------
        grid : `~mesoed.timegrid.TimeGrid`
        sigma : `float`
            Standard deviation of the current at each step.
        mu0 : `float` or array_like, optional
            Free-running mean current.
        chi : `float`, optional
            Same-time response ``J[n] = chi A_loc[n]`` in every active mode.
        modes : `list` of `int`, optional
            Modes the device is active in, default all.
        device_id : `str`, optional
        """
        projector = _mode_projector(grid, modes)
        noise_cov = float(sigma) ** 2 * np.kron(np.eye(grid.n_steps), projector)
        return cls(
            grid,
            mu0=_masked_mean(grid, mu0, projector),
            chi=CausalKernel.local(grid, float(chi) * projector),
            noise_cov=noise_cov,
            device_id=device_id,
        )

    @classmethod
    def stationary(
        cls, grid, sigma, correlation_time, mu0=0.0, chi=0.0, modes=None, device_id="gaussian"
    ):
        """
        A device with exponentially correlated noise.

        The noise covariance is ``sigma**2 exp(-|t - t'| / correlation_time)``
        in every active mode.
        """
        correlation_time = float(correlation_time)
        if correlation_time <= 0:
            raise ValueError(f"correlation_time must be positive, got {correlation_time}.")
        projector = _mode_projector(grid, modes)
        times = grid.times
        temporal = np.exp(-np.abs(times[:, None] - times[None, :]) / correlation_time)
        noise_cov = float(sigma) ** 2 * np.kron(temporal, projector)
        return cls(
            grid,
            mu0=_masked_mean(grid, mu0, projector),
            chi=CausalKernel.local(grid, float(chi) * projector),
            noise_cov=noise_cov,
            device_id=device_id,
        )

    @classmethod
    def zero_noise(cls, grid, mu0=0.0, chi=None, device_id="gaussian"):
        """A deterministic device, ``J = mu0 + chi A_loc``."""
        return cls(grid, mu0=mu0, chi=chi, noise_cov=None, device_id=device_id)

    @property
    def mu0(self):
        """(`~mesoed.timegrid.Trajectory`) Free-running mean current."""
        return self._mu0

    @property
    def chi(self):
        """(`~mesoed.timegrid.CausalKernel`) Response to the local field."""
        return self._chi

    @property
    def noise_cov(self):
        """(`numpy.ndarray`) Noise covariance in flattened order."""
        return self._noise_cov

    @property
    def factor(self):
        """(`numpy.ndarray`) Noise factor with ``factor @ factor.T == noise_cov``."""
        return self._factor

    @property
    def is_noiseless(self):
        """(`bool`) Whether the noise covariance vanishes."""
        return not np.any(self._noise_cov)

    @property
    def field_sensitive(self):
        return not self._chi.is_zero

    @property
    def same_time_response(self):
        return self._chi.has_same_time_terms

    @property
    def emission_modes(self):
        n_modes = self.grid.n_modes
        active = np.any(self._mu0.values != 0, axis=0)
        active |= np.any(np.diag(self._noise_cov).reshape(self.grid.shape) != 0, axis=0)
        active |= np.any(self._chi.tensor != 0, axis=(0, 2, 3))
        return tuple(mode for mode in range(n_modes) if active[mode])

    def sampler(self, streams, replications):
        return GaussianSampler(self, streams, replications)


def _mode_projector(grid, modes):
    if modes is None:
        modes = range(grid.n_modes)
    diagonal = np.zeros(grid.n_modes)
    for mode in modes:
        if not 0 <= mode < grid.n_modes:
            raise ValueError(f"Mode {mode} out of range for {grid.n_modes} modes.")
        diagonal[mode] = 1.0
    return np.diag(diagonal)


def _masked_mean(grid, mu0, projector):
    mu0 = np.broadcast_to(np.asarray(mu0, dtype=float), grid.shape)
    return Trajectory(grid, mu0 * np.diag(projector)[None, :])


# ================================================================================================
#                                   POISSON DETECTOR
# ================================================================================================


class PoissonSampler(DeviceSampler):
    """Batch sampler of a `PoissonDetectorSpec`."""

    def __init__(self, spec, streams, replications):
        replications = list(replications)
        super().__init__(len(replications))
        self._spec = spec
        self._uniforms = np.stack(
            [streams.generator(spec.device_id, rep).random(spec.grid.n_steps) for rep in replications]
        )

    def step(self, n, field):
        spec = self._spec
        dt = spec.grid.dt
        mean = spec.rate(field.values[:, n, spec.input_mode]) * dt
        counts = poisson.ppf(self._uniforms[:, n], mean)
        counts = np.where(mean > 0, np.nan_to_num(counts), 0.0)
        current = np.zeros((self.n_reps, spec.grid.n_modes))
        current[:, spec.output_mode] = spec.charge * np.clip(counts, 0.0, None) / dt
        return current


class PoissonDetectorSpec(BareDevice):
    """
    A photon counter driven by the squared field in its input mode.

    Counts in step ``n`` are Poisson with mean ``rate * dt`` where
    ``rate = dark_rate + efficiency * A_loc[n, input_mode]**2``. The device
    emits ``charge * counts / dt`` in its output mode.

    Parameters
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
    input_mode : `int`, optional
        Mode whose field is detected, default 0.
    output_mode : `int`, optional
        Mode carrying the photocurrent, default the last mode.
    efficiency : `float`, optional
        Quantum efficiency in ``[0, 1]``, default 1.
    dark_rate : `float`, optional
        Dark count rate in counts/s, default 0.
    charge : `float`, optional
        Charge per count, default 1.
    device_id : `str`, optional
    """

    kind = "poisson"

    def __init__(
        self,
        grid,
        input_mode=0,
        output_mode=None,
        efficiency=1.0,
        dark_rate=0.0,
        charge=1.0,
        device_id="detector",
    ):
        super().__init__(grid, device_id)
        if output_mode is None:
            output_mode = grid.n_modes - 1
        for name, mode in (("input_mode", input_mode), ("output_mode", output_mode)):
            if not 0 <= mode < grid.n_modes:
                raise ValueError(f"{name} {mode} out of range for {grid.n_modes} modes.")
        if not 0.0 <= efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in [0, 1], got {efficiency}.")
        if not dark_rate >= 0:
            raise ValueError(f"dark_rate must be non-negative, got {dark_rate}.")
        self._input_mode = int(input_mode)
        self._output_mode = int(output_mode)
        self._efficiency = float(efficiency)
        self._dark_rate = float(dark_rate)
        self._charge = float(charge)

    @property
    def input_mode(self):
        """(`int`) The detected mode."""
        return self._input_mode

    @property
    def output_mode(self):
        """(`int`) The mode of the photocurrent."""
        return self._output_mode

    @property
    def efficiency(self):
        """(`float`) Quantum efficiency."""
        return self._efficiency

    @property
    def dark_rate(self):
        """(`float`) Dark count rate in counts/s."""
        return self._dark_rate

    @property
    def charge(self):
        """(`float`) Charge per count."""
        return self._charge

    def rate(self, field):
        """Count rate for the given input-mode field values."""
        return self._dark_rate + self._efficiency * np.square(field)

    @property
    def field_sensitive(self):
        return self._efficiency > 0

    @property
    def same_time_response(self):
        return self._efficiency > 0

    @property
    def emission_modes(self):
        return (self._output_mode,)

    def sampler(self, streams, replications):
        return PoissonSampler(self, streams, replications)


# ================================================================================================
#                                   SAMPLING AND ESTIMATION
# ================================================================================================


def radiate(G, J):
    """
    The field radiated by a current, ``A = G J``.

    Parameters
    ----------
    G : `~mesoed.timegrid.CausalKernel`
        Retarded propagator.
    J : `~mesoed.timegrid.Trajectory`

    Returns
    -------
    field : `~mesoed.timegrid.Trajectory`
    """
    return apply_kernel(G, J)


def _as_field_values(grid, field):
    if field is None:
        return np.zeros(grid.shape)
    if isinstance(field, Trajectory):
        grid.check_same(field.grid, "field")
        return field.values
    values = np.asarray(field, dtype=float)
    if values.shape != grid.shape:
        raise ValueError(f"Field has shape {values.shape}, expected {grid.shape}.")
    return values


def _run_device(device, field_values, streams, chunk):
    grid = device.grid
    sampler = device.sampler(streams, chunk)
    field = LocalField(grid, len(chunk), [field_values])
    currents = np.zeros((len(chunk),) + grid.shape)
    for n in range(grid.n_steps):
        field.resolve(n)
        currents[:, n] = sampler.step(n, field)
    return currents


def draw_bare(device, A_loc, streams, replications, chunk_size=None):
    """
    Draw currents from a device at a given local field.

    Parameters
    ----------
    device : `BareDevice`
    A_loc : `~mesoed.timegrid.Trajectory` or `numpy.ndarray` or None
        The local field. `None` means no field.
    streams : `~mesoed.util.util.RandomStreams`
    replications : `int` or sequence of `int`
        Number of replications or explicit replication indices.
    chunk_size : `int`, optional
        Replications per batch.

    Returns
    -------
    currents : `numpy.ndarray`
        Shape ``(n_reps, n_steps, n_modes)``, in replication order.
    """
    values = _as_field_values(device.grid, A_loc)
    chunks = replication_chunks(replications, chunk_size)
    return np.concatenate([_run_device(device, values, streams, chunk) for chunk in chunks])


def sample_bare(device, A_loc, streams, replication=0):
    """
    Draw one current trajectory from ``p[J | A_loc]``.

    Parameters
    ----------
    device : `BareDevice`
    A_loc : `~mesoed.timegrid.Trajectory`
    streams : `~mesoed.util.util.RandomStreams`
    replication : `int`, optional
        The replication index, default 0.

    Returns
    -------
    current : `~mesoed.timegrid.Trajectory`
    """
    currents = draw_bare(device, A_loc, streams, [replication])
    return Trajectory(device.grid, currents[0])


class MomentReport:
    """
    Sample moments of a batch of trajectories.

    Attributes
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
    n_samples : `int`
    mean : `~mesoed.timegrid.Trajectory`
    mean_std_err : `numpy.ndarray`
        Standard error of the mean, shape ``(n_steps, n_modes)``.
    cov : `numpy.ndarray`
        ``(size, size)`` unbiased covariance, or raw second moments when the
        report is not central.
    cov_std_err : `numpy.ndarray`
        Standard error of ``cov``.
    central : `bool`
    """

    def __init__(self, grid, n_samples, mean, mean_std_err, cov, cov_std_err, central=True):
        self.grid = grid
        self.n_samples = n_samples
        self.mean = mean
        self.mean_std_err = mean_std_err
        self.cov = cov
        self.cov_std_err = cov_std_err
        self.central = central

    def variance(self):
        """Return the diagonal of `cov` reshaped to ``(n_steps, n_modes)``."""
        return np.diag(self.cov).reshape(self.grid.shape)

    def covariance(self, step, mode, step2, mode2):
        """Return one entry of `cov` and its standard error."""
        i = self.grid.flat_index(step, mode)
        j = self.grid.flat_index(step2, mode2)
        return self.cov[i, j], self.cov_std_err[i, j]

    def __repr__(self):
        return f"MomentReport(n_samples={self.n_samples}, central={self.central}, grid={self.grid!r})"


def estimate_moments(samples, grid=None, central=True):
    """
    Estimate means and second moments of sampled trajectories.

    Parameters
    ----------
    samples : `list` of `~mesoed.timegrid.Trajectory` or `numpy.ndarray`
        Either trajectories on a common grid, or an array of shape
        ``(n_samples, n_steps, n_modes)`` together with ``grid``.
    grid : `~mesoed.timegrid.TimeGrid`, optional
        Required when ``samples`` is an array.
    central : `bool`, optional
        Unbiased covariance if True (default), raw second moments otherwise.

    Returns
    -------
    report : `MomentReport`

    Raises
    ------
    ValueError: If fewer than two samples are given or grids differ.
    """
    if isinstance(samples, np.ndarray):
        if grid is None:
            raise ValueError("A grid is required when samples are given as an array.")
        data = samples.reshape(samples.shape[0], -1).astype(float)
        if data.shape[1] != grid.size:
            raise ValueError(f"Samples have {data.shape[1]} values per sample, expected {grid.size}.")
    else:
        samples = list(samples)
        if not samples:
            raise ValueError("At least two samples are required, got 0.")
        grid = samples[0].grid if grid is None else grid
        for sample in samples:
            grid.check_same(sample.grid, "sample")
        data = np.stack([sample.flat for sample in samples])
    n = data.shape[0]
    if n < 2:
        raise ValueError(f"At least two samples are required, got {n}.")

    mean = data.mean(axis=0)
    deviations = data - mean
    if central:
        second = deviations.T @ deviations / (n - 1)
        basis = deviations
    else:
        second = data.T @ data / n
        basis = data
    squares = basis * basis
    fourth = squares.T @ squares / n
    cov_std_err = np.sqrt(np.clip(fourth - second * second, 0.0, None) / n)
    mean_std_err = np.sqrt(np.sum(deviations * deviations, axis=0) / (n - 1) / n)
    return MomentReport(
        grid,
        n,
        Trajectory.from_flat(grid, mean),
        mean_std_err.reshape(grid.shape),
        second,
        cov_std_err,
        central=central,
    )


def _elementary(device):
    bare = getattr(device, "bare", None)
    if bare is not None:
        return _elementary(bare)
    if tuple(device.components) == (device,):
        return [device]
    return [part for component in device.components for part in _elementary(component)]


def _gaussian_defects(spec, tolerance):
    cov = np.asarray(spec.noise_cov, dtype=float)
    if not np.all(np.isfinite(cov)):
        return ["noise covariance is not finite"]
    if not np.allclose(cov, cov.T, rtol=0, atol=tolerance):
        return ["noise covariance is not symmetric"]
    if not np.any(cov):
        return []
    lowest = float(linalg.eigvalsh(cov)[0])
    if lowest < -tolerance * max(1.0, float(np.max(np.abs(cov)))):
        return [f"noise covariance has a negative eigenvalue {lowest:.3e}"]
    return []


def _poisson_defects(spec, A_loc):
    defects = []
    for name in ("efficiency", "dark_rate"):
        value = getattr(spec, name)
        if not np.isfinite(value) or value < 0:
            defects.append(f"{name} is {value}")
    field = np.zeros(spec.grid.n_steps) if A_loc is None else A_loc.values[:, spec.input_mode]
    rate = np.asarray(spec.rate(field), dtype=float)
    if not np.all(np.isfinite(rate)):
        defects.append("count rate is not finite")
    elif np.any(rate < 0):
        defects.append(f"count rate reaches {rate.min():.3e}")
    return defects


def check_classicality(device, A_loc=None):
    """
    Report whether a device has a classical sampling representation.

    A device can be simulated by sampling only when its conditional
    P-functional is a nonnegative density. Dressed and composed devices are
    resolved into their elementary parts and each part is tested:
    a Gaussian part needs a finite, positive semidefinite noise covariance
    (within ``[numerics] psd_tolerance``), a Poisson part a nonnegative
    efficiency, dark rate and count rate. Parts of any other kind have no
    known criterion and are reported as not classical.

    Parameters
    ----------
    device : `BareDevice`
    A_loc : `~mesoed.timegrid.Trajectory`, optional
        Local field at which count rates are evaluated, default zero.

    Returns
    -------
    report : `dict`
        Keys ``device_id``, ``kinds``, ``classical`` and ``reasons``; the
        reasons name every failed condition.
    """
    if not isinstance(device, BareDevice):
        raise TypeError(f"Expected a BareDevice, got {type(device).__name__}.")
    tolerance = get_numeric("psd_tolerance", 1e-10)
    parts = _elementary(device)
    reasons = []
    for part in parts:
        if isinstance(part, GaussianDeviceSpec):
            defects = _gaussian_defects(part, tolerance)
        elif isinstance(part, PoissonDetectorSpec):
            defects = _poisson_defects(part, A_loc)
        else:
            defects = [f"no nonnegativity criterion for kind '{part.kind}'"]
        reasons.extend(f"{part.device_id}: {defect}" for defect in defects)
    return {
        "device_id": device.device_id,
        "kinds": sorted({part.kind for part in parts}),
        "classical": not reasons,
        "reasons": reasons,
    }
